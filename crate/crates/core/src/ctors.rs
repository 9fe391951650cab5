//! Constructor tables for the extended calculus.
//!
//! A table maps each data type to its ordered constructors and arities. The
//! text format has one type per line, constructors separated by `|`:
//!
//! ```text
//! -- comments start with two dashes
//! Bool = False/0 | True/0
//! List = Nil/0 | Cons/2
//! ```

use std::sync::Arc;

use crate::error::CtorTableError;

/// Constructor names with their arities, in declaration order.
pub type CtorList = Vec<(Arc<str>, usize)>;

/// Data types with their constructors in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorTable {
    types: Vec<(Arc<str>, CtorList)>,
}

/// Where a constructor lives in its table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorInfo {
    pub type_name: Arc<str>,
    pub index: usize,
    pub arity: usize,
}

impl Default for CtorTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl CtorTable {
    /// Booleans, lists and pairs.
    pub fn standard() -> Self {
        CtorTable::from_decls(&[
            ("Bool", &[("False", 0), ("True", 0)]),
            ("List", &[("Nil", 0), ("Cons", 2)]),
            ("Pair", &[("Pair", 2)]),
        ])
        .expect("standard table is well formed")
    }

    /// A table with no types.
    pub fn empty() -> Self {
        CtorTable { types: Vec::new() }
    }

    pub fn from_decls(decls: &[(&str, &[(&str, usize)])]) -> Result<Self, CtorTableError> {
        let mut table = CtorTable::empty();
        for (ty, ctors) in decls {
            table.add_type(ty, ctors.iter().map(|(c, a)| (c.to_string(), *a)).collect())?;
        }
        Ok(table)
    }

    fn add_type(&mut self, ty: &str, ctors: Vec<(String, usize)>) -> Result<(), CtorTableError> {
        if self.types.iter().any(|(t, _)| &**t == ty) {
            return Err(CtorTableError::DuplicateType(ty.to_string()));
        }
        let mut list: Vec<(Arc<str>, usize)> = Vec::new();
        for (c, a) in ctors {
            if self.lookup(&c).is_some() || list.iter().any(|(d, _)| **d == *c) {
                return Err(CtorTableError::DuplicateConstructor(c));
            }
            list.push((Arc::from(c.as_str()), a));
        }
        self.types.push((Arc::from(ty), list));
        Ok(())
    }

    /// Parses the line-oriented table format described in the module docs.
    pub fn parse(text: &str) -> Result<Self, CtorTableError> {
        let mut table = CtorTable::empty();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split("--").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |message: &str| CtorTableError::Malformed { line: line_no, message: message.to_string() };
            let (ty, rest) = line.split_once('=').ok_or_else(|| malformed("expected `Type = Ctor/arity | ...`"))?;
            let ty = ty.trim();
            if !is_upper_ident(ty) {
                return Err(malformed("type names start with an uppercase letter"));
            }
            let mut ctors = Vec::new();
            for item in rest.split('|') {
                let item = item.trim();
                let (name, arity) = item.split_once('/').ok_or_else(|| malformed("constructor needs `/arity`"))?;
                let name = name.trim();
                if !is_upper_ident(name) {
                    return Err(malformed("constructor names start with an uppercase letter"));
                }
                let arity: usize = arity.trim().parse().map_err(|_| malformed("arity must be a natural number"))?;
                ctors.push((name.to_string(), arity));
            }
            if ctors.is_empty() {
                return Err(malformed("a type needs at least one constructor"));
            }
            table.add_type(ty, ctors)?;
        }
        Ok(table)
    }

    pub fn lookup(&self, ctor: &str) -> Option<CtorInfo> {
        self.types.iter().find_map(|(ty, ctors)| {
            ctors.iter().position(|(c, _)| &**c == ctor).map(|index| CtorInfo {
                type_name: ty.clone(),
                index,
                arity: ctors[index].1,
            })
        })
    }

    pub fn arity(&self, ctor: &str) -> Option<usize> {
        self.lookup(ctor).map(|i| i.arity)
    }

    /// Constructors of a type in declaration order.
    pub fn constructors_of(&self, ty: &str) -> Option<&[(Arc<str>, usize)]> {
        self.types.iter().find(|(t, _)| &**t == ty).map(|(_, c)| c.as_slice())
    }

    pub fn types(&self) -> impl Iterator<Item = (&Arc<str>, &[(Arc<str>, usize)])> {
        self.types.iter().map(|(t, c)| (t, c.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

fn is_upper_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_table_has_bool_list_pair() {
        let t = CtorTable::standard();
        assert_eq!(t.arity("Cons"), Some(2));
        assert_eq!(t.lookup("True").unwrap().type_name.as_ref(), "Bool");
        assert_eq!(t.constructors_of("Pair").unwrap().len(), 1);
    }

    #[test]
    fn parses_text_tables() {
        let t = CtorTable::parse("-- colours\nColour = Red/0 | Green/0\nBox = MkBox/1\n").unwrap();
        assert_eq!(t.arity("MkBox"), Some(1));
        assert_eq!(t.lookup("Green").unwrap().index, 1);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(matches!(CtorTable::parse("A = X/0\nB = X/1"), Err(CtorTableError::DuplicateConstructor(_))));
        assert!(matches!(CtorTable::parse("A = X"), Err(CtorTableError::Malformed { line: 1, .. })));
        assert!(matches!(CtorTable::parse("a = X/0"), Err(CtorTableError::Malformed { .. })));
    }
}

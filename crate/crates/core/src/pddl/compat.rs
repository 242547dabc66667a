use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Atom, DomainAst, ProblemAst};

/// A problem/domain mismatch. Returned as data, never raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks that `problem` only uses what `domain` declares.
pub fn check_compat(domain: &DomainAst, problem: &ProblemAst) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |message: String| out.push(Diagnostic { message });

    if domain.name != problem.domain_name {
        push(format!(
            "problem targets domain '{}' but the domain is '{}'",
            problem.domain_name, domain.name
        ));
    }

    let hierarchy = domain.type_hierarchy();
    let mut objects = HashMap::new();
    for o in &problem.objects {
        if !hierarchy.contains(&o.ty) {
            push(format!("object '{}' has undeclared type '{}'", o.name, o.ty));
        }
        if objects.insert(o.name.as_str(), o.ty.as_str()).is_some() {
            push(format!("object '{}' declared twice", o.name));
        }
    }

    let mut check_atoms = |atoms: &[Atom], section: &str| {
        for a in atoms {
            match domain.predicate(&a.predicate) {
                None => push(format!("{section}: undeclared predicate '{}'", a.predicate)),
                Some(decl) if decl.params.len() != a.args.len() => push(format!(
                    "{section}: predicate '{}' expects arity {} but found {}",
                    a.predicate,
                    decl.params.len(),
                    a.args.len()
                )),
                Some(_) => {}
            }
            for arg in &a.args {
                if !objects.contains_key(arg.as_str()) {
                    push(format!("{section}: undeclared object '{arg}' in ({})", a.predicate));
                }
            }
        }
    };
    check_atoms(&problem.init, "init");
    check_atoms(&problem.goal, "goal");
    out
}

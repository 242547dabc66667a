//! Canonical PDDL text for parsed models. Output re-parses to an equal AST.

use std::fmt::Write;

use super::ast::*;

fn typed_names(out: &mut String, names: &[TypedName], typed: bool) {
    let mut i = 0;
    while i < names.len() {
        let ty = &names[i].ty;
        let mut j = i;
        while j < names.len() && names[j].ty == *ty {
            if j > i || i > 0 {
                out.push(' ');
            }
            out.push_str(&names[j].name);
            j += 1;
        }
        if typed {
            let _ = write!(out, " - {ty}");
        }
        i = j;
    }
}

fn atom(out: &mut String, a: &Atom) {
    out.push('(');
    out.push_str(&a.predicate);
    for arg in &a.args {
        out.push(' ');
        out.push_str(arg);
    }
    out.push(')');
}

fn uses_types(d: &DomainAst) -> bool {
    d.requirements.contains(&Requirement::Typing)
        || !d.types.is_empty()
        || d.predicates.iter().flat_map(|p| &p.params).any(|p| p.ty != ROOT_TYPE)
        || d.schemas.iter().flat_map(|s| &s.params).any(|p| p.ty != ROOT_TYPE)
}

pub fn domain_to_string(d: &DomainAst) -> String {
    let typed = uses_types(d);
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        out.push_str("  (:requirements");
        for r in &d.requirements {
            out.push(' ');
            out.push_str(r.keyword());
        }
        out.push_str(")\n");
    }
    if !d.types.is_empty() {
        out.push_str("  (:types ");
        let decls: Vec<TypedName> = d
            .types
            .iter()
            .map(|t| TypedName::new(t.name.clone(), t.parent.clone()))
            .collect();
        typed_names(&mut out, &decls, true);
        out.push_str(")\n");
    }
    out.push_str("  (:predicates");
    for p in &d.predicates {
        let _ = write!(out, "\n    ({}", p.name);
        if !p.params.is_empty() {
            out.push(' ');
            typed_names(&mut out, &p.params, typed);
        }
        out.push(')');
    }
    out.push_str(")\n");
    for s in &d.schemas {
        let _ = write!(out, "  (:action {}\n    :parameters (", s.name);
        typed_names(&mut out, &s.params, typed);
        out.push_str(")\n    :precondition (and");
        for a in &s.pre {
            out.push(' ');
            atom(&mut out, a);
        }
        out.push_str(")\n    :effect (and");
        for a in &s.add {
            out.push(' ');
            atom(&mut out, a);
        }
        for a in &s.del {
            out.push_str(" (not ");
            atom(&mut out, a);
            out.push(')');
        }
        out.push_str("))\n");
    }
    out.push_str(")\n");
    out
}

pub fn problem_to_string(p: &ProblemAst) -> String {
    let typed = p.objects.iter().any(|o| o.ty != ROOT_TYPE);
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    out.push_str("  (:objects");
    if !p.objects.is_empty() {
        out.push(' ');
        typed_names(&mut out, &p.objects, typed);
    }
    out.push_str(")\n  (:init");
    for a in &p.init {
        out.push_str("\n    ");
        atom(&mut out, a);
    }
    out.push_str(")\n  (:goal (and");
    for a in &p.goal {
        out.push_str("\n    ");
        atom(&mut out, a);
    }
    out.push_str("))\n)\n");
    out
}

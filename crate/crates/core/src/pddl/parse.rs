use std::collections::HashSet;

use super::ast::*;
use super::sexpr::{self, Pos, SExpr};
use super::PddlError;

pub fn parse_domain(text: &str) -> Result<DomainAst, PddlError> {
    let top = sexpr::read(text)?;
    let body = define_body(&top, "domain")?;
    let name = body.name;

    let mut domain = DomainAst {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        schemas: Vec::new(),
    };

    let mut schema_pos = Vec::new();
    for section in body.sections {
        let head = section_head(section)?;
        let items = &section.as_list().expect("section is a list")[1..];
        match head {
            ":requirements" => domain.requirements = requirements(items)?,
            ":types" => {
                for t in typed_list(items, false)? {
                    domain.types.push(TypeDecl {
                        name: t.name,
                        parent: t.ty,
                    });
                }
            }
            ":predicates" => {
                for p in items {
                    domain.predicates.push(predicate_decl(p)?);
                }
            }
            ":action" => {
                domain.schemas.push(action(section)?);
                schema_pos.push(section.pos());
            }
            ":constants" => return Err(PddlError::unsupported(section.pos(), "constants")),
            ":functions" => return Err(PddlError::unsupported(section.pos(), "numeric fluents")),
            ":durative-action" => return Err(PddlError::unsupported(section.pos(), "durative action")),
            ":derived" => return Err(PddlError::unsupported(section.pos(), "derived predicate")),
            ":constraints" => return Err(PddlError::unsupported(section.pos(), "constraints")),
            other => {
                return Err(PddlError::syntax(
                    section.pos(),
                    format!("unknown domain section '{other}'"),
                ))
            }
        }
    }

    validate_domain(&domain, top.pos(), &schema_pos)?;
    Ok(domain)
}

pub fn parse_problem(text: &str) -> Result<ProblemAst, PddlError> {
    let top = sexpr::read(text)?;
    let body = define_body(&top, "problem")?;
    let mut problem = ProblemAst {
        name: body.name,
        domain_name: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
    };
    let mut saw_domain = false;

    for section in body.sections {
        let head = section_head(section)?;
        let items = &section.as_list().expect("section is a list")[1..];
        match head {
            ":domain" => {
                problem.domain_name = single_atom(items, section.pos(), ":domain")?;
                saw_domain = true;
            }
            ":requirements" => {
                requirements(items)?;
            }
            ":objects" => problem.objects = typed_list(items, false)?,
            ":init" => {
                for item in items {
                    problem.init.push(ground_atom(item, "initial state")?);
                }
            }
            ":goal" => {
                problem.goal = match items {
                    [goal] => conjunction(goal, GoalKind::Goal)?,
                    _ => return Err(PddlError::syntax(section.pos(), ":goal takes exactly one formula")),
                };
                for atom in &problem.goal {
                    if let Some(v) = atom.args.iter().find(|a| a.starts_with('?')) {
                        return Err(PddlError::invalid(
                            section.pos(),
                            format!("goal atom uses variable '{v}'"),
                        ));
                    }
                }
            }
            ":metric" => return Err(PddlError::unsupported(section.pos(), "metric")),
            ":constraints" => return Err(PddlError::unsupported(section.pos(), "constraints")),
            other => {
                return Err(PddlError::syntax(
                    section.pos(),
                    format!("unknown problem section '{other}'"),
                ))
            }
        }
    }
    if !saw_domain {
        return Err(PddlError::syntax(top.pos(), "missing (:domain ...) section"));
    }
    dedup(&mut problem.init);
    dedup(&mut problem.goal);
    Ok(problem)
}

struct DefineBody<'a> {
    name: String,
    sections: &'a [SExpr],
}

fn define_body<'a>(top: &'a SExpr, kind: &str) -> Result<DefineBody<'a>, PddlError> {
    let items = top
        .as_list()
        .ok_or_else(|| PddlError::syntax(top.pos(), "expected (define ...)"))?;
    if items.first().and_then(SExpr::as_atom) != Some("define") {
        return Err(PddlError::syntax(top.pos(), "expected (define ...)"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(top.pos(), format!("expected ({kind} <name>)")))?;
    let name = match header.as_list() {
        Some([SExpr::Atom { text: k, .. }, SExpr::Atom { text: n, .. }]) if k == kind => n.clone(),
        _ => return Err(PddlError::syntax(header.pos(), format!("expected ({kind} <name>)"))),
    };
    Ok(DefineBody {
        name,
        sections: &items[2..],
    })
}

fn section_head(section: &SExpr) -> Result<&str, PddlError> {
    section
        .head()
        .filter(|h| h.starts_with(':'))
        .ok_or_else(|| PddlError::syntax(section.pos(), "expected a (:keyword ...) section"))
}

fn single_atom(items: &[SExpr], pos: Pos, what: &str) -> Result<String, PddlError> {
    match items {
        [SExpr::Atom { text, .. }] => Ok(text.clone()),
        _ => Err(PddlError::syntax(pos, format!("{what} takes exactly one name"))),
    }
}

fn requirements(items: &[SExpr]) -> Result<Vec<Requirement>, PddlError> {
    let mut out = Vec::new();
    for item in items {
        let flag = item
            .as_atom()
            .ok_or_else(|| PddlError::syntax(item.pos(), "expected a requirement flag"))?;
        let req = match flag {
            ":strips" => Requirement::Strips,
            ":typing" => Requirement::Typing,
            other => return Err(PddlError::unsupported(item.pos(), format!("requirement {other}"))),
        };
        if !out.contains(&req) {
            out.push(req);
        }
    }
    Ok(out)
}

/// `a b - t c ?d` style list. Untyped names default to `object`.
fn typed_list(items: &[SExpr], variables: bool) -> Result<Vec<TypedName>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        match item {
            SExpr::Atom { text, pos } if text == "-" => {
                let ty = match items.get(i + 1) {
                    Some(SExpr::Atom { text, .. }) => text.clone(),
                    Some(list @ SExpr::List { .. }) if list.head() == Some("either") => {
                        return Err(PddlError::unsupported(list.pos(), "either type"))
                    }
                    _ => return Err(PddlError::syntax(*pos, "expected a type name after '-'")),
                };
                if pending.is_empty() {
                    return Err(PddlError::syntax(*pos, "type annotation without names"));
                }
                out.extend(pending.drain(..).map(|n| TypedName::new(n, ty.clone())));
                i += 2;
            }
            SExpr::Atom { text, pos } => {
                if variables != text.starts_with('?') {
                    let msg = if variables {
                        format!("expected a variable but found '{text}'")
                    } else {
                        format!("expected a name but found variable '{text}'")
                    };
                    return Err(PddlError::syntax(*pos, msg));
                }
                pending.push(text.clone());
                i += 1;
            }
            SExpr::List { pos, .. } => {
                return Err(PddlError::syntax(*pos, "unexpected list in typed name list"))
            }
        }
    }
    out.extend(pending.into_iter().map(|n| TypedName::new(n, ROOT_TYPE)));
    Ok(out)
}

fn predicate_decl(expr: &SExpr) -> Result<PredicateDecl, PddlError> {
    let items = expr
        .as_list()
        .ok_or_else(|| PddlError::syntax(expr.pos(), "expected (<predicate> ?args...)"))?;
    let name = items
        .first()
        .and_then(SExpr::as_atom)
        .ok_or_else(|| PddlError::syntax(expr.pos(), "expected a predicate name"))?;
    Ok(PredicateDecl {
        name: name.to_string(),
        params: typed_list(&items[1..], true)?,
    })
}

fn action(section: &SExpr) -> Result<ActionSchemaAst, PddlError> {
    let items = section.as_list().expect("section is a list");
    let name = items
        .get(1)
        .and_then(SExpr::as_atom)
        .ok_or_else(|| PddlError::syntax(section.pos(), "expected an action name"))?;
    let mut schema = ActionSchemaAst {
        name: name.to_string(),
        params: Vec::new(),
        pre: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    };
    let mut rest = &items[2..];
    while let [key, value, tail @ ..] = rest {
        let keyword = key
            .as_atom()
            .ok_or_else(|| PddlError::syntax(key.pos(), "expected an action keyword"))?;
        match keyword {
            ":parameters" => {
                let list = value
                    .as_list()
                    .ok_or_else(|| PddlError::syntax(value.pos(), "expected a parameter list"))?;
                schema.params = typed_list(list, true)?;
            }
            ":precondition" => schema.pre = conjunction(value, GoalKind::Precondition)?,
            ":effect" => {
                let (add, del) = effect(value)?;
                schema.add = add;
                schema.del = del;
            }
            other => {
                return Err(PddlError::syntax(
                    key.pos(),
                    format!("unknown action keyword '{other}'"),
                ))
            }
        }
        rest = tail;
    }
    if let [dangling] = rest {
        return Err(PddlError::syntax(dangling.pos(), "action keyword without a value"));
    }
    dedup(&mut schema.pre);
    dedup(&mut schema.add);
    dedup(&mut schema.del);
    Ok(schema)
}

#[derive(Clone, Copy)]
enum GoalKind {
    Precondition,
    Goal,
}

fn conjunction(expr: &SExpr, kind: GoalKind) -> Result<Vec<Atom>, PddlError> {
    let mut out = Vec::new();
    collect_conjuncts(expr, kind, &mut out)?;
    Ok(out)
}

fn collect_conjuncts(expr: &SExpr, kind: GoalKind, out: &mut Vec<Atom>) -> Result<(), PddlError> {
    let Some(items) = expr.as_list() else {
        return Err(PddlError::syntax(expr.pos(), "expected a formula"));
    };
    if items.is_empty() {
        return Ok(());
    }
    match expr.head() {
        Some("and") => {
            for item in &items[1..] {
                collect_conjuncts(item, kind, out)?;
            }
            Ok(())
        }
        Some("not") => Err(PddlError::unsupported(
            expr.pos(),
            match kind {
                GoalKind::Precondition => "negative precondition",
                GoalKind::Goal => "negative goal",
            },
        )),
        Some(head) => match unsupported_formula(head) {
            Some(construct) => Err(PddlError::unsupported(expr.pos(), construct)),
            None => {
                out.push(atom(expr)?);
                Ok(())
            }
        },
        None => Err(PddlError::syntax(expr.pos(), "expected a predicate name")),
    }
}

fn unsupported_formula(head: &str) -> Option<&'static str> {
    Some(match head {
        "or" => "disjunction",
        "imply" => "implication",
        "forall" => "universal quantifier",
        "exists" => "existential quantifier",
        "=" => "equality",
        "when" => "conditional effect",
        "<" | ">" | "<=" | ">=" => "numeric comparison",
        "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => "numeric effect",
        _ => return None,
    })
}

fn effect(expr: &SExpr) -> Result<(Vec<Atom>, Vec<Atom>), PddlError> {
    let mut add = Vec::new();
    let mut del = Vec::new();
    collect_effects(expr, &mut add, &mut del)?;
    Ok((add, del))
}

fn collect_effects(expr: &SExpr, add: &mut Vec<Atom>, del: &mut Vec<Atom>) -> Result<(), PddlError> {
    let Some(items) = expr.as_list() else {
        return Err(PddlError::syntax(expr.pos(), "expected an effect"));
    };
    if items.is_empty() {
        return Ok(());
    }
    match expr.head() {
        Some("and") => {
            for item in &items[1..] {
                collect_effects(item, add, del)?;
            }
            Ok(())
        }
        Some("not") => match &items[1..] {
            [inner] => {
                if let Some(construct) = inner.head().and_then(unsupported_formula) {
                    return Err(PddlError::unsupported(inner.pos(), construct));
                }
                del.push(atom(inner)?);
                Ok(())
            }
            _ => Err(PddlError::syntax(expr.pos(), "(not ...) takes exactly one atom")),
        },
        Some("forall") => Err(PddlError::unsupported(expr.pos(), "quantified effect")),
        Some(head) => match unsupported_formula(head) {
            Some(construct) => Err(PddlError::unsupported(expr.pos(), construct)),
            None => {
                add.push(atom(expr)?);
                Ok(())
            }
        },
        None => Err(PddlError::syntax(expr.pos(), "expected a predicate name")),
    }
}

fn atom(expr: &SExpr) -> Result<Atom, PddlError> {
    let items = expr
        .as_list()
        .ok_or_else(|| PddlError::syntax(expr.pos(), "expected an atom"))?;
    let mut names = Vec::with_capacity(items.len());
    for item in items {
        match item {
            SExpr::Atom { text, .. } => names.push(text.clone()),
            SExpr::List { pos, .. } => {
                return Err(PddlError::syntax(*pos, "nested term in atom (function terms are unsupported)"))
            }
        }
    }
    let predicate = names.remove(0);
    Ok(Atom {
        predicate,
        args: names,
    })
}

fn ground_atom(expr: &SExpr, what: &str) -> Result<Atom, PddlError> {
    match expr.head() {
        Some("not") => return Err(PddlError::unsupported(expr.pos(), format!("negative literal in {what}"))),
        Some("=") => return Err(PddlError::unsupported(expr.pos(), "numeric fluents")),
        _ => {}
    }
    let atom = atom(expr)?;
    if let Some(v) = atom.args.iter().find(|a| a.starts_with('?')) {
        return Err(PddlError::invalid(expr.pos(), format!("variable '{v}' in {what}")));
    }
    Ok(atom)
}

fn dedup(atoms: &mut Vec<Atom>) {
    let mut seen = HashSet::new();
    atoms.retain(|a| seen.insert(a.clone()));
}

fn validate_domain(domain: &DomainAst, pos: Pos, schema_pos: &[Pos]) -> Result<(), PddlError> {
    let hierarchy = domain.type_hierarchy();
    if let Some(ty) = hierarchy.find_cycle() {
        return Err(PddlError::invalid(pos, format!("type '{ty}' is its own ancestor")));
    }
    let mut type_names = HashSet::new();
    for t in &domain.types {
        if !type_names.insert(t.name.as_str()) {
            return Err(PddlError::invalid(pos, format!("type '{}' declared twice", t.name)));
        }
        if !hierarchy.contains(&t.parent) {
            return Err(PddlError::invalid(pos, format!("undeclared parent type '{}'", t.parent)));
        }
    }

    let mut predicate_names = HashSet::new();
    for p in &domain.predicates {
        if !predicate_names.insert(p.name.as_str()) {
            return Err(PddlError::invalid(pos, format!("predicate '{}' declared twice", p.name)));
        }
        check_types(&hierarchy, &p.params, pos, &format!("predicate '{}'", p.name))?;
    }

    let mut schema_names = HashSet::new();
    for (s, &pos) in domain.schemas.iter().zip(schema_pos) {
        let context = format!("action '{}'", s.name);
        if !schema_names.insert(s.name.as_str()) {
            return Err(PddlError::invalid(pos, format!("{context} declared twice")));
        }
        check_types(&hierarchy, &s.params, pos, &context)?;
        let mut vars = HashSet::new();
        for p in &s.params {
            if !vars.insert(p.name.as_str()) {
                return Err(PddlError::invalid(pos, format!("{context}: parameter '{}' repeated", p.name)));
            }
        }
        for a in s.pre.iter().chain(&s.add).chain(&s.del) {
            let decl = domain
                .predicate(&a.predicate)
                .ok_or_else(|| PddlError::invalid(pos, format!("{context}: undeclared predicate '{}'", a.predicate)))?;
            if decl.params.len() != a.args.len() {
                return Err(PddlError::invalid(
                    pos,
                    format!(
                        "{context}: predicate '{}' expects {} arguments, found {}",
                        a.predicate,
                        decl.params.len(),
                        a.args.len()
                    ),
                ));
            }
            for arg in &a.args {
                if !arg.starts_with('?') {
                    return Err(PddlError::unsupported(pos, format!("constant '{arg}' in {context}")));
                }
                if !vars.contains(arg.as_str()) {
                    return Err(PddlError::invalid(pos, format!("{context}: unbound variable '{arg}'")));
                }
            }
        }
        if let Some(a) = s.add.iter().find(|a| s.del.contains(a)) {
            return Err(PddlError::invalid(
                pos,
                format!("{context}: ({} {}) is both added and deleted", a.predicate, a.args.join(" ")),
            ));
        }
    }
    Ok(())
}

fn check_types(h: &TypeHierarchy, params: &[TypedName], pos: Pos, context: &str) -> Result<(), PddlError> {
    match params.iter().find(|p| !h.contains(&p.ty)) {
        Some(p) => Err(PddlError::invalid(pos, format!("{context}: undeclared type '{}'", p.ty))),
        None => Ok(()),
    }
}

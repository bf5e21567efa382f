//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! (written straight to stdout so it shows without `--nocapture`) and then
//! asserts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nullgvn::corpus::{bundled, bundled_programs, generate, GeneratorConfig};
use nullgvn::gvn::do_gvn;
use nullgvn::interp::{check_solution_soundness, check_term_soundness, Limits};
use nullgvn::ir::{Program, Stmt};
use nullgvn::names::is_tagged;
use nullgvn::normalize::dominators;
use nullgvn::parse::print_program;
use nullgvn::pipeline::{analyze, check_semantics, corpus_row, transform, Level, Options, SolverKind};
use nullgvn::solver::{
    generate_constraints, generate_constraints_without, solve_naive, solve_worklist, Rule,
};

const GENERATED: u64 = 1000;

fn verdict_line(n: u32, title: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n} [{status}] {title}: {detail}\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn generated() -> &'static [(String, Program)] {
    static CORPUS: OnceLock<Vec<(String, Program)>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        (0..GENERATED)
            .map(|seed| (format!("gen_{seed}"), generate(&GeneratorConfig::default().with_seed(seed)).unwrap()))
            .collect()
    })
}

/// Bundled programs followed by the generated corpus.
fn everything() -> Vec<(String, Program)> {
    let mut all: Vec<(String, Program)> =
        bundled_programs().into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    all.extend(generated().iter().cloned());
    all
}

fn parse(name: &str) -> Program {
    bundled(name).unwrap().parse().unwrap()
}

fn block_text(p: &Program, proc: &str, block: &str) -> Vec<String> {
    let b = p.procedure(proc).unwrap().block(block).unwrap();
    b.stmts.iter().map(nullgvn::parse::print_stmt).collect()
}

fn unproved(name: &str, level: Level) -> usize {
    analyze(&parse(name), Options { level, solver: SolverKind::Worklist }).unwrap().report.asserts_unproved
}

#[test]
fn criterion_1_listing_goldens() {
    let start = Instant::now();
    let out = do_gvn(&parse("equal_paths")).unwrap().program;
    let expected = parse("equal_paths_result");
    let got = print_program(&out);
    let want = print_program(&expected);
    let listing_ok = out.procedure("gvn") == expected.procedure("gvn") && got == want;

    let merge = do_gvn(&parse("merge_assert")).unwrap().program;
    let l3 = block_text(&merge, "merge", "L3");
    let merge_ok = l3.len() == 2
        && l3[0].ends_with(":= x;")
        && l3[0].starts_with("gvnTmp__gvn")
        && l3[1] == format!("assert ({} != Null);", l3[0].trim_end_matches(" := x;"));
    let elapsed = start.elapsed().as_secs_f64();
    let pass = listing_ok && merge_ok && elapsed < 1.0;
    verdict_line(
        1,
        "GVN listing goldens",
        pass,
        &format!("six-line listing exact={listing_ok}, merge L3 {l3:?}, {elapsed:.3}s"),
    );
    assert!(pass, "got:\n{got}\nwant:\n{want}");
}

#[test]
fn criterion_2_precision_flips() {
    let start = Instant::now();
    let ssa_proves_reassign = unproved("ssa_reassign", Level::Ssa) == 0 && unproved("ssa_reassign", Level::None) == 1;
    let cse = (unproved("redundant_load", Level::Ssa), unproved("redundant_load", Level::Gvn));
    let gvn = (unproved("equal_paths", Level::Ssa), unproved("equal_paths", Level::Gvn));
    let flips = cse == (1, 0) && gvn == (1, 0);

    // The final read of x.f in fk must survive both the bare pass and the
    // full pipeline untouched.
    let untouched = |p: &Program| {
        let last = p.procedure("fk").unwrap().blocks[0].stmts.last().cloned();
        matches!(last, Some(Stmt::Assign { src, .. }) if src.fields == ["f"] && !is_tagged(&src.base) && src.base == "x")
    };
    let fk = parse("field_kill");
    let bare = do_gvn(&fk).unwrap().program;
    let piped = transform(&fk, Level::Gvn).unwrap().program;
    let fieldkill_ok = untouched(&bare) && untouched(&piped);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = ssa_proves_reassign && flips && fieldkill_ok && elapsed < 1.0;
    verdict_line(
        2,
        "precision flips",
        pass,
        &format!(
            "ssa proves reassign={ssa_proves_reassign}, cse (ssa,gvn)={cse:?}, listing (ssa,gvn)={gvn:?}, \
             field kill untouched={fieldkill_ok}, {elapsed:.3}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_semantics_preserved() {
    let start = Instant::now();
    let progs = everything();
    let mut mismatches = Vec::new();
    let mut traces = 0usize;
    for (name, p) in &progs {
        for c in check_semantics(p, Limits::depth(64)).unwrap() {
            traces += c.original_traces;
            if !c.equivalent {
                mismatches.push(format!("{name}/{}", c.level));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && elapsed < 600.0;
    verdict_line(
        3,
        "semantics preservation at depth 64",
        pass,
        &format!("{} programs, {traces} traces, {} mismatches {mismatches:?}, {elapsed:.1}s", progs.len(), mismatches.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_4_solver_soundness() {
    let start = Instant::now();
    let progs = everything();
    let mut violations = Vec::new();
    for (name, p) in &progs {
        for level in [Level::None, Level::Ssa, Level::Gvn] {
            let a = analyze(p, Options { level, solver: SolverKind::Worklist }).unwrap();
            let v = check_solution_soundness(&a.transformed.program, &a.points_to, Limits::depth(32)).unwrap();
            if !v.is_empty() {
                violations.push(format!("{name}@{level}: {v:?}"));
            }
        }
    }

    // Each disabled rule must be caught somewhere in the corpus.
    let mut blind = Vec::new();
    for rule in Rule::ALL {
        let disabled = BTreeSet::from([rule]);
        let caught = progs.iter().any(|(_, p)| {
            let pt = solve_worklist(&generate_constraints_without(p, &disabled));
            !check_solution_soundness(p, &pt, Limits::depth(32)).unwrap().is_empty()
        });
        if !caught {
            blind.push(format!("{rule:?}"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = violations.is_empty() && blind.is_empty() && elapsed < 600.0;
    verdict_line(
        4,
        "solver soundness and mutation sensitivity",
        pass,
        &format!(
            "{} programs x 3 levels, {} violations, {} rules mutated, undetected {blind:?}, {elapsed:.1}s",
            progs.len(),
            violations.len(),
            Rule::ALL.len()
        ),
    );
    assert!(pass, "{violations:?}");
}

#[test]
fn criterion_5_solver_equivalence() {
    let progs = everything();
    let mut differ = Vec::new();
    let mut solved = 0;
    for (name, p) in &progs {
        for level in [Level::None, Level::Ssa, Level::Gvn] {
            let t = transform(p, level).unwrap().program;
            let cs = generate_constraints(&t);
            solved += 1;
            if solve_naive(&cs) != solve_worklist(&cs) {
                differ.push(format!("{name}@{level}"));
            }
        }
    }
    let pass = differ.is_empty();
    verdict_line(
        5,
        "naive and worklist solutions identical",
        pass,
        &format!("{solved} solves, {} differ {differ:?}", differ.len()),
    );
    assert!(pass);
}

/// Tagged-variable uses that are not dominated by the variable's single
/// assignment, plus tagged variables assigned more than once.
fn dominance_violations(p: &Program) -> Vec<String> {
    let mut bad = Vec::new();
    for proc in &p.procedures {
        let dom = dominators(proc);
        let mut defs: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
        for b in &proc.blocks {
            for (i, s) in b.stmts.iter().enumerate() {
                for d in s.defs() {
                    if is_tagged(d) {
                        defs.entry(d).or_default().push((&b.label, i));
                    }
                }
            }
        }
        for (v, sites) in &defs {
            if sites.len() != 1 {
                bad.push(format!("{}::{v} assigned {} times", proc.name, sites.len()));
            }
        }
        for b in &proc.blocks {
            for (i, s) in b.stmts.iter().enumerate() {
                for u in s.uses() {
                    if !is_tagged(u) {
                        continue;
                    }
                    let ok = defs.get(u).and_then(|d| d.first()).is_some_and(|&(db, di)| {
                        if db == b.label {
                            di < i
                        } else {
                            dom[&b.label].contains(db)
                        }
                    });
                    if !ok {
                        bad.push(format!("{}::{u} used at {}#{i}", proc.name, b.label));
                    }
                }
            }
        }
    }
    bad
}

#[test]
fn criterion_6_dominance() {
    let progs = everything();
    let mut bad = Vec::new();
    let mut uses = 0;
    for (name, p) in &progs {
        let out = transform(p, Level::Gvn).unwrap().program;
        uses += out.statements().flat_map(|(_, _, _, s)| s.uses()).filter(|u| is_tagged(u)).count();
        for v in dominance_violations(&out) {
            bad.push(format!("{name}: {v}"));
        }
    }
    let pass = bad.is_empty() && uses > 0;
    verdict_line(
        6,
        "tagged uses dominated by their assignment",
        pass,
        &format!("{} programs, {uses} tagged uses, {} violations {bad:?}", progs.len(), bad.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_7_term_equivalence() {
    let mut bad = Vec::new();
    let mut occurrences = 0;
    let mut checked = 0;
    for (name, p) in generated() {
        let t = transform(p, Level::Gvn).unwrap();
        let log = t.log.as_ref().unwrap();
        occurrences += log.occurrences.len();
        checked += 1;
        let v = check_term_soundness(&t.program, log, Limits::depth(64)).unwrap();
        if !v.is_empty() {
            bad.push(format!("{name}: {v:?}"));
        }
    }
    let pass = bad.is_empty() && checked >= 200;
    verdict_line(
        7,
        "same-term occurrences hold equal values",
        pass,
        &format!("{checked} programs, {occurrences} logged occurrences, {} violations", bad.len()),
    );
    assert!(pass, "{bad:?}");
}

#[test]
fn criterion_8_effect_direction() {
    let start = Instant::now();
    let n = 200;
    let mut worse = Vec::new();
    let (mut ssa_u, mut gvn_u, mut asserts) = (0, 0, 0);
    let (mut ssa_ms, mut gvn_ms) = (0.0, 0.0);
    for (name, p) in &generated()[..n] {
        let row = corpus_row(name, p, SolverKind::Worklist).unwrap();
        if row.gvn_unproved > row.ssa_unproved {
            worse.push(name.clone());
        }
        ssa_u += row.ssa_unproved;
        gvn_u += row.gvn_unproved;
        asserts += row.asserts;
        ssa_ms += row.ssa_ms;
        gvn_ms += row.gvn_ms;
    }
    let reduction = ssa_u as f64 / gvn_u.max(1) as f64;
    let time_ratio = gvn_ms / ssa_ms;
    let pass = worse.is_empty() && reduction >= 3.0 && time_ratio <= 5.0;
    verdict_line(
        8,
        "GVN reduces unproved asserts",
        pass,
        &format!(
            "{n} defensive programs, {asserts} asserts, unproved ssa {ssa_u} -> gvn {gvn_u} ({reduction:.2}x), \
             worse on {} programs, gvn phase {gvn_ms:.1}ms vs ssa pipeline {ssa_ms:.1}ms ({time_ratio:.2}x), {:.1}s",
            worse.len(),
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass, "worse on {worse:?}");
}

#[test]
fn generated_corpus_is_checkable() {
    // Sanity for the shared corpus itself: each program asserts something.
    assert!(generated().iter().all(|(_, p)| p.count_asserts() > 0));
    assert!(generated().iter().any(|(_, p)| p.statements().any(|(_, _, _, s)| matches!(s, Stmt::Call { .. }))));
}

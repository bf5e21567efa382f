use std::collections::BTreeMap;
use std::time::Instant;

use nullgvn::corpus::{generate, GeneratorConfig};
use nullgvn::interp::{enumerate_traces, Event, Trace};
use nullgvn::ir::{Cond, Path, Program, Stmt};
use nullgvn::names::{is_reserved, is_tagged};
use nullgvn::normalize::{lift_loops, to_ssa};
use nullgvn::parse::{parse_program, parse_transformed, print_program};
use nullgvn::pipeline::{transform, Level};
use nullgvn::solver::{generate_constraints, solve_naive, solve_worklist, Constraint, ConstraintSet, VarKey};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = GeneratorConfig> {
    (any::<u64>(), 1usize..4, 4usize..24, 1usize..5, 0.0f64..=1.0, 0.0f64..0.3).prop_map(
        |(seed, procs, blocks, stmts, density, loops)| {
            let mut c = GeneratorConfig::default().with_seed(seed);
            c.max_procs = procs;
            c.max_blocks = blocks;
            c.max_stmts = stmts;
            c.null_check_density = density;
            c.loop_probability = loops;
            c
        },
    )
}

fn program() -> impl Strategy<Value = Program> {
    config().prop_map(|c| generate(&c).unwrap())
}

/// `short` is `long` cut off by fuel exhaustion, or equal to it.
fn is_cut_of(short: &Trace, long: &Trace) -> bool {
    match short.events.split_last() {
        Some((Event::Truncated, head)) => long.events.starts_with(head),
        _ => short == long,
    }
}

fn tag_def(s: &Stmt) -> Option<&str> {
    s.defs().first().copied().filter(|d| is_tagged(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(p in program()) {
        prop_assert_eq!(parse_program(&print_program(&p)).unwrap(), p.clone());
        for level in [Level::Ssa, Level::Gvn] {
            let t = transform(&p, level).unwrap().program;
            prop_assert_eq!(parse_transformed(&print_program(&t)).unwrap(), t);
        }
    }

    #[test]
    fn deeper_runs_extend_shallower_ones(p in program(), depth in 2u32..16) {
        let short = enumerate_traces(&p, depth).unwrap();
        let long = enumerate_traces(&p, depth * 2).unwrap();
        for t in &long {
            prop_assert!(short.iter().any(|s| is_cut_of(s, t)), "no depth-{} ancestor for {:?}", depth, t);
        }
        for s in short.iter().filter(|s| s.last() != Some(&Event::Truncated)) {
            prop_assert!(long.contains(s));
        }
    }

    #[test]
    fn ssa_defines_each_version_once(p in program()) {
        let s = to_ssa(&lift_loops(&p).unwrap()).unwrap();
        for proc in &s.procedures {
            let mut defs: BTreeMap<&str, usize> = BTreeMap::new();
            for b in &proc.blocks {
                for (i, st) in b.stmts.iter().enumerate() {
                    for d in st.defs() {
                        if s.is_global(d) {
                            continue;
                        }
                        prop_assert!(is_reserved(d), "{}: source name {} survived", proc.name, d);
                        prop_assert!(!proc.params.iter().any(|x| x == d), "parameter {} redefined", d);
                        if d.contains("__p") {
                            // Merge copies sit at the end of predecessor blocks.
                            let tail_copies = b.stmts[i..].iter().all(|t| matches!(t, Stmt::Assign { src, .. } if src.is_var()));
                            prop_assert!(tail_copies, "{}: merge copy {} mid-block", proc.name, d);
                        } else {
                            *defs.entry(d).or_default() += 1;
                        }
                    }
                }
            }
            prop_assert!(defs.values().all(|&n| n == 1), "{}: {:?}", proc.name, defs);
        }
    }

    #[test]
    fn unchecked_programs_only_harvest_asserts(seed in any::<u64>()) {
        let p = generate(&GeneratorConfig::unchecked().with_seed(seed)).unwrap();
        prop_assert!(!p.statements().any(|(_, _, _, s)| matches!(s, Stmt::Assume(Cond::NonNull(_)))));
        let out = transform(&p, Level::Gvn).unwrap().program;
        for proc in &out.procedures {
            let cfg = proc.cfg();
            for (bi, b) in proc.blocks.iter().enumerate() {
                for (i, s) in b.stmts.iter().enumerate() {
                    let Some(tag) = tag_def(s) else { continue };
                    let before = i.checked_sub(1).map(|j| &b.stmts[j]);
                    let after = b.stmts.get(i + 1);
                    let by_assert = matches!(before, Some(Stmt::Assert(Cond::NonNull(_))))
                        || after == Some(&Stmt::Assert(Cond::NonNull(Path::var(tag))));
                    // Copies carrying a fact into a merge block open the block.
                    let merge_copy = cfg.preds[bi].len() > 1 && b.stmts[..i].iter().all(|t| tag_def(t).is_some());
                    prop_assert!(by_assert || merge_copy, "{}/{}#{} {:?}", proc.name, b.label, i, s);
                }
            }
        }
    }

    #[test]
    fn solvers_agree(p in program()) {
        let cs = generate_constraints(&transform(&p, Level::Gvn).unwrap().program);
        prop_assert_eq!(solve_naive(&cs), solve_worklist(&cs));
    }
}

#[test]
fn worklist_scales_on_long_copy_chains() {
    let n = 10_000;
    let v = |i: usize| VarKey::local("main", &format!("v{i}"));
    let mut cs = ConstraintSet {
        vars: (0..n).map(v).collect(),
        tagged: vec![false; n],
        ..ConstraintSet::default()
    };
    cs.constraints.push(Constraint::Base { dst: 0, site: 1 });
    // Listed back to front so each naive round moves the site one link.
    for i in (1..n).rev() {
        cs.constraints.push(Constraint::Copy { dst: i, src: i - 1 });
    }
    let t = Instant::now();
    let fast = solve_worklist(&cs);
    let worklist = t.elapsed();
    let t = Instant::now();
    let slow = solve_naive(&cs);
    let naive = t.elapsed();
    assert_eq!(fast, slow);
    assert!(fast.var(&v(n - 1)).contains(&1));
    assert!(naive >= worklist * 10, "naive {naive:?} vs worklist {worklist:?}");
}

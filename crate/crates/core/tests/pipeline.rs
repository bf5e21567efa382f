use nullgvn::corpus::{bundled_programs, generate, GeneratorConfig};
use nullgvn::parse::{parse_transformed, print_program};
use nullgvn::pipeline::{analyze, transform, Level, Options, SolverKind};
use nullgvn::solver::SafetyReport;

fn without_timings(mut r: SafetyReport) -> SafetyReport {
    r.timings_ms = Default::default();
    r
}

fn opts(level: Level) -> Options {
    Options { level, solver: SolverKind::Worklist }
}

#[test]
fn generator_output_is_stable() {
    let golden = include_str!("golden/gen_seed0.ir");
    assert_eq!(print_program(&generate(&GeneratorConfig::default()).unwrap()), golden);
}

#[test]
fn reanalysing_emitted_program_gives_same_verdicts() {
    for (name, p) in bundled_programs() {
        for level in [Level::Ssa, Level::Gvn] {
            let a = analyze(&p, opts(level)).unwrap();
            let text = print_program(&a.transformed.program);
            let reread = parse_transformed(&text).unwrap();
            let b = analyze(&reread, opts(Level::None)).unwrap();
            assert_eq!(
                without_timings(a.report),
                without_timings(b.report),
                "{name} at {level}"
            );
        }
    }
}

#[test]
fn reports_are_deterministic() {
    for seed in 0..50 {
        let p = generate(&GeneratorConfig::default().with_seed(seed)).unwrap();
        let first = without_timings(analyze(&p, Options::default()).unwrap().report);
        let second = without_timings(analyze(&p, Options::default()).unwrap().report);
        assert_eq!(first, second);
        let naive = analyze(&p, Options { solver: SolverKind::Naive, ..Options::default() }).unwrap();
        assert_eq!(first, without_timings(naive.report));
    }
}

#[test]
fn gvn_never_loses_precision_on_bundled_programs() {
    for (name, p) in bundled_programs() {
        let ssa = analyze(&p, opts(Level::Ssa)).unwrap().report;
        let gvn = analyze(&p, opts(Level::Gvn)).unwrap().report;
        assert!(gvn.asserts_unproved <= ssa.asserts_unproved, "{name}");
        assert_eq!(gvn.asserts_total, ssa.asserts_total, "{name}");
    }
}

#[test]
fn transformation_is_deterministic() {
    let p = generate(&GeneratorConfig::default().with_seed(7)).unwrap();
    let a = print_program(&transform(&p, Level::Gvn).unwrap().program);
    let b = print_program(&transform(&p, Level::Gvn).unwrap().program);
    assert_eq!(a, b);
}

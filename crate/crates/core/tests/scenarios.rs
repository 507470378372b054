use core::f64::consts::PI;

use dirac_core::clifford::Spinor;
use dirac_core::monitors::{self, Verdict};
use dirac_core::scenario::{run, ConnectionSpec, InitialData, Model, Scenario, TargetSpec};

fn base(model: Model, initial: InitialData) -> Scenario {
    Scenario {
        model,
        length: 2.0 * PI,
        cells: 64,
        t_final: 1.0,
        output_every: 4,
        lambda: 0.0,
        kappa: 0.0,
        potential: None,
        connection: ConnectionSpec::Flat { rank: 1 },
        target: TargetSpec::Sphere,
        q: 3,
        initial,
        perturbation: 1e-6,
        monitors: model.monitors(),
        refinement_levels: 1,
    }
}

fn random_spinor(seed: u64) -> InitialData {
    InitialData::RandomSpinor {
        seed,
        modes: 4,
        amplitude: 0.5,
    }
}

#[test]
fn massive_plane_wave_passes_its_conservation_checks_under_refinement() {
    let mut s = base(
        Model::Massive,
        InitialData::PlaneWave { mode: 2, branch: 1 },
    );
    s.lambda = 1.0;
    s.refinement_levels = 2;
    let r = run(&s).unwrap();
    for name in ["E1", "E4"] {
        assert_eq!(r.entry(name).unwrap().verdict, Verdict::Pass, "{name}");
    }
    assert!(r.entries.iter().all(|e| e.verdict != Verdict::Fail), "{r}");
}

#[test]
fn twisted_run_with_abelian_connection_has_no_failures() {
    let mut s = base(Model::Twisted, random_spinor(11));
    s.connection = ConnectionSpec::AbelianWave {
        mode: 1,
        a: 0.5,
        b: 0.3,
    };
    s.refinement_levels = 2;
    let r = run(&s).unwrap();
    assert!(r.entries.iter().all(|e| e.verdict != Verdict::Fail), "{r}");
}

#[test]
fn uncoupled_wave_map_satisfies_the_field_equations() {
    let s = Scenario {
        monitors: ["E1", "box_e_phi", "T_divergence"]
            .iter()
            .map(|n| monitors::lookup(n).unwrap())
            .collect(),
        refinement_levels: 2,
        ..base(
            Model::DiracWaveMap,
            InitialData::Uncoupled {
                a: 1.0,
                b: 1.0,
                chi: Spinor::from_re(1.0, 0.5),
            },
        )
    };
    let r = run(&s).unwrap();
    for e in &r.entries {
        assert_eq!(e.verdict, Verdict::Pass, "{e:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let mut s = base(Model::Thirring, random_spinor(3));
    s.kappa = 1.0;
    assert_eq!(run(&s).unwrap(), run(&s).unwrap());
}

#[test]
fn rows_follow_the_output_cadence() {
    let s = base(Model::Free, random_spinor(5));
    let r = run(&s).unwrap();
    let dt = s.length / s.cells as f64;
    for pair in r.rows.windows(2) {
        assert!((pair[1] - pair[0] - 4.0 * dt).abs() < 1e-12);
    }
    for series in &r.series {
        assert_eq!(series.t.len(), r.rows.len(), "{}", series.name);
    }
}

#[test]
fn refinement_doubles_the_grid() {
    let s = base(Model::Free, random_spinor(5));
    let fine = s.refined(2);
    assert_eq!(fine.cells, 4 * s.cells);
    assert_eq!(fine.length, s.length);
}

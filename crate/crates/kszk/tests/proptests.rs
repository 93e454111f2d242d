//! Property-based invariants: config canonicalization and snapshots must
//! round-trip exactly, the sine transforms must invert each other on any
//! well-formed grid, and the functional inequalities must hold for arbitrary
//! coefficient data.

use proptest::prelude::*;

use kszk::basis::{analyze, synthesize, ModeGrid, SpectralField};
use kszk::config::{parse_config, RunConfig, SweepRanges, Range3};
use kszk::diagnostics::evaluate_inequalities;
use kszk::geometry::DomainSpec;
use kszk::snapshot::{read_snapshot_from, write_snapshot_to};
use kszk::solver::{InitialData, InitialKind, Scheme, SolverConfig, VectorState};
use ndarray::{ArrayD, IxDyn};

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (2usize..=4)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..10.0, n),
                prop::collection::vec(1usize..=8, n),
                prop::collection::vec(1usize..=6, n),
                (
                    1e-6f64..1e-2,
                    1.0f64..100.0,
                    any::<bool>(),
                    any::<bool>(),
                    any::<bool>(),
                    any::<bool>(),
                    1usize..=10,
                ),
                (
                    0usize..3,
                    1e-3f64..10.0,
                    any::<bool>(),
                    any::<u64>(),
                    proptest::option::of(1e-4f64..1.0),
                    "[a-z]{1,8}\\.csv",
                ),
                proptest::option::of((
                    0.1f64..5.0,
                    0.1f64..5.0,
                    1usize..5,
                    1e-3f64..1.0,
                    1e-3f64..1.0,
                    1usize..5,
                )),
            )
        })
        .prop_map(
            |(lengths, modes, extra, solver_raw, initial_raw, sweep_raw)| {
                let n = lengths.len();
                let (dt, t_factor, cnab2, zk, nonlinear, dealias, record_every) = solver_raw;
                let (kind_idx, amplitude, with_mode, seed, c_s, output_path) = initial_raw;
                let grid_points: Vec<usize> =
                    modes.iter().zip(&extra).map(|(&m, &e)| m + e).collect();
                // A single-point axis must have min = max to be valid.
                let axis = |lo: f64, hi: f64, count: usize| Range3 {
                    min: lo.min(hi),
                    max: if count == 1 { lo.min(hi) } else { lo.max(hi) },
                    count,
                };
                let sweep = sweep_raw.map(|(s1, s2, sc, a1, a2, ac)| SweepRanges {
                    scale: axis(s1, s2, sc),
                    amplitude: axis(a1, a2, ac),
                });
                RunConfig {
                    domain: DomainSpec::new(lengths).unwrap(),
                    modes,
                    grid_points,
                    solver: SolverConfig {
                        dt,
                        t_end: dt * t_factor,
                        scheme: if cnab2 { Scheme::Cnab2 } else { Scheme::Imex1 },
                        zk,
                        nonlinear,
                        dealias,
                        record_every,
                    },
                    initial: InitialData {
                        kind: match kind_idx {
                            0 => InitialKind::PotentialBump,
                            1 => InitialKind::SingleMode,
                            _ => InitialKind::RandomCurlFree,
                        },
                        amplitude,
                        mode: with_mode.then(|| vec![1; n]),
                        seed,
                    },
                    c_s,
                    output_path,
                    sweep,
                }
            },
        )
}

/// A grid whose collocation count strictly exceeds the mode count in every
/// dimension, so analysis and synthesis form an exact pair.
fn grid_strategy(max_dim: usize) -> impl Strategy<Value = ModeGrid> {
    (2usize..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(0.2f64..5.0, n),
            prop::collection::vec(1usize..=5, n),
            prop::collection::vec(1usize..=3, n),
        )
            .prop_map(|(lengths, modes, extra)| {
                let points: Vec<usize> = modes.iter().zip(&extra).map(|(&m, &e)| m + e).collect();
                ModeGrid::new(DomainSpec::new(lengths).unwrap(), modes, points).unwrap()
            })
    })
}

fn field_strategy(max_dim: usize) -> impl Strategy<Value = SpectralField> {
    grid_strategy(max_dim).prop_flat_map(|grid| {
        let count: usize = grid.coeff_shape().iter().product();
        prop::collection::vec(-3.0f64..3.0, count).prop_map(move |coeffs| {
            let arr = ArrayD::from_shape_vec(IxDyn(grid.coeff_shape()), coeffs).unwrap();
            SpectralField::new(grid.clone(), arr).unwrap()
        })
    })
}

fn state_strategy() -> impl Strategy<Value = VectorState> {
    grid_strategy(3).prop_flat_map(|grid| {
        let n = grid.dim();
        let count: usize = grid.coeff_shape().iter().product::<usize>() * n;
        prop::collection::vec(-1e12f64..1e12, count).prop_map(move |all| {
            let components = all
                .chunks(count / n)
                .map(|chunk| {
                    let arr =
                        ArrayD::from_shape_vec(IxDyn(grid.coeff_shape()), chunk.to_vec()).unwrap();
                    SpectralField::new(grid.clone(), arr).unwrap()
                })
                .collect();
            VectorState::new(components, 0.0).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn canonical_config_text_parses_back_identically(cfg in config_strategy()) {
        let text = cfg.canonical_text();
        let reparsed = parse_config(&text, &[]).unwrap();
        prop_assert_eq!(&cfg, &reparsed, "canonical text:\n{}", text);
        // Canonicalization is idempotent.
        prop_assert_eq!(text, reparsed.canonical_text());
    }

    #[test]
    fn snapshots_round_trip_bit_for_bit(state in state_strategy()) {
        let mut buf = Vec::new();
        write_snapshot_to(&mut buf, &state).unwrap();
        let restored = read_snapshot_from(&mut buf.as_slice(), state.grid()).unwrap();
        for (orig, back) in state.components().iter().zip(restored.components()) {
            for (x, y) in orig.coeffs().iter().zip(back.coeffs().iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis(field in field_strategy(3)) {
        let back = analyze(&synthesize(&field));
        let scale = field
            .coeffs()
            .iter()
            .fold(1.0f64, |acc, c| acc.max(c.abs()));
        for (orig, rec) in field.coeffs().iter().zip(back.coeffs().iter()) {
            prop_assert!(
                (orig - rec).abs() <= 1e-12 * scale,
                "coefficient {} came back as {}",
                orig,
                rec
            );
        }
    }

    #[test]
    fn inequalities_hold_for_arbitrary_fields(field in field_strategy(4)) {
        for r in evaluate_inequalities(&field) {
            if r.applicable {
                prop_assert!(
                    r.residual >= -1e-10,
                    "{} failed with residual {:.3e}",
                    r.name,
                    r.residual
                );
            }
        }
    }
}

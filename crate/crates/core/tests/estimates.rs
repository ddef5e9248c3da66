use inoutwave::energy::{weighted_energy, EnergyRecorder};
use inoutwave::estimates::*;
use inoutwave::flux::AxisRecorder;
use inoutwave::mathlib::ModelParams;
use inoutwave::solver::*;
use proptest::prelude::*;

const KAPPAS: [f64; 3] = [0.3, 0.5, 0.7];
const RADII: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

struct Run {
    morawetz: MorawetzRecorder,
    weighted: WeightedMorawetzRecorder,
    axis: AxisRecorder,
    energy: EnergyRecorder,
    e_kappa: Vec<f64>,
}

fn run(d: usize, p: f64, n: usize, t_final: f64) -> Run {
    let params = ModelParams::new(d, p).unwrap();
    let grid = RadialGrid::new(d, n, t_final + 8.0).unwrap();
    let data = InitialData::compact_bump(0.5, 0.0, 2.0).unwrap();
    let mut weights: Vec<WeightSpec> = KAPPAS.iter().map(|&k| WeightSpec::power(k)).collect();
    weights.push(WeightSpec {
        kind: WeightKind::Power { kappa: 0.0 },
        gamma: 0.5,
    });
    let mut morawetz = MorawetzRecorder::new(&RADII);
    let mut weighted = WeightedMorawetzRecorder::new(weights).unwrap();
    let mut axis = AxisRecorder::new();
    let mut energy = EnergyRecorder::new(1);
    evolve(
        &data,
        &grid,
        &params,
        &SolverConfig::new(t_final),
        &mut [&mut morawetz, &mut weighted, &mut axis, &mut energy],
    )
    .unwrap();
    let s0 = data.discretize(&grid);
    let model = Model::new(params, true);
    let e_kappa = KAPPAS.iter().map(|&k| weighted_energy(&s0, &grid, &model, k).unwrap()).collect();
    Run {
        morawetz,
        weighted,
        axis,
        energy,
        e_kappa,
    }
}

#[test]
fn morawetz_inequality_and_refinement() {
    for &(d, p) in &[(3, 3.0), (4, 2.5), (5, 2.2)] {
        let totals: Vec<Vec<f64>> = [512, 1024, 2048]
            .iter()
            .map(|&n| {
                let r = run(d, p, n, 24.0);
                let e = r.energy.rows[0].report.e;
                let reps = r.morawetz.reports(e, false);
                for rep in &reps {
                    assert!(rep.total <= rep.bound, "d={d} R={}: {} > {}", rep.radius, rep.total, rep.bound);
                    assert!(rep.interior_term >= 0.0 && rep.sphere_term >= 0.0 && rep.exterior_term >= 0.0);
                }
                let single = morawetz_inequality(&r.morawetz, e, 2.0).unwrap();
                assert_eq!(single, reps[2]);
                reps.iter().map(|x| x.total).collect()
            })
            .collect();
        for i in 0..RADII.len() {
            let order = convergence_order([totals[0][i], totals[1][i], totals[2][i]]).unwrap();
            assert!((1.6..=2.4).contains(&order), "d={d} R={}: order {order}", RADII[i]);
        }
    }
}

#[test]
fn weighted_decay_chain_and_fits() {
    for &(d, p) in &[(3, 3.0), (5, 2.2)] {
        let r = run(d, p, 2048, 40.0);
        let t = r.energy.times();
        let em = r.energy.e_minus();
        for (i, &kappa) in KAPPAS.iter().enumerate() {
            for c in weighted_tail_checks(&r.weighted, i, &r.axis).unwrap() {
                assert!(c.lhs <= c.rhs * (1.0 + 1e-3) + 1e-12, "d={d} k={kappa} t0={}: {c:?}", c.t0);
            }
            let w = r.weighted.result(i).unwrap();
            assert!(w.lhs >= 0.0 && w.mu_weighted >= 0.0 && w.k1 > 0.0);
            if d == 3 {
                let fit = decay_fit(&t, &em, kappa, r.e_kappa[i], 5.0).unwrap();
                assert!(fit.fitted_slope <= -kappa + 0.1, "k={kappa}: {fit:?}");
                assert!(fit.bound_constant <= 50.0);
                let half = t.iter().position(|&x| x >= 20.0).unwrap();
                let short = decay_fit(&t[..=half], &em[..=half], kappa, r.e_kappa[i], 5.0).unwrap();
                let growth = fit.truncated_l_power_norm / short.truncated_l_power_norm - 1.0;
                assert!((0.0..=0.05).contains(&growth), "k={kappa}: growth {growth}");
            }
        }
    }
}

#[test]
fn unit_weight_shares_the_slab_integral() {
    let r = run(5, 2.2, 512, 16.0);
    let (_, mu, m) = r.weighted.tail(KAPPAS.len(), 0);
    let slab = r.axis.slab_morawetz(0.0, 16.0).unwrap();
    assert_eq!(mu, 0.0);
    assert!((m - slab).abs() <= 1e-12 * slab);
    let red = rediscover(&r.axis).unwrap();
    assert_eq!(red.morawetz, slab);
    let e = r.energy.rows[0].report.e;
    assert!(red.defect.abs() <= red.e_minus_t + 0.02 * e);
}

#[test]
fn corollary_integrals_are_bounded() {
    let r = run(3, 3.0, 1024, 24.0);
    let e = r.energy.rows[0].report.e;
    for g in unweighted_global_integrals(&r.morawetz, e) {
        // each is ≲ E with an R-independent constant
        assert!(g.ratio_weighted_potential < 10.0 && g.ratio_local_energy < 10.0 && g.ratio_sphere < 10.0, "{g:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn lemma_holds_for_random_densities(
        k in 1usize..=9,
        raw in prop::collection::vec((0.01f64..1.0, 0.0f64..3.0), 2..12),
    ) {
        let kappa = k as f64 / 10.0;
        let mut y = vec![0.0];
        let mut rho = vec![raw[0].1];
        for &(dy, r) in &raw {
            y.push(y.last().unwrap() + dy);
            rho.push(r);
        }
        let (f, mass) = l_power_lemma_check(&y, &rho, kappa).unwrap();
        prop_assert!(f <= mass * (1.0 + 1e-9) + 1e-15, "kappa {kappa}: {f} > {mass}");
    }
}

use fairfl::data::TabularDataset;
use fairfl::fairness::{mmd_squared_grad, FairnessSpec};
use fairfl::kernels::Kernel;
use fairfl::models::{Architecture, Model};
use fairfl_oracles::{fd_gradient, logistic, naive_mmd_squared, RefKernel};
use proptest::prelude::*;

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn arch() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        Just(Architecture::Logistic),
        (1usize..6).prop_map(|hidden| Architecture::Mlp { hidden }),
    ]
}

fn model_and_input() -> impl Strategy<Value = (Model, Vec<f64>)> {
    (arch(), 1usize..5).prop_flat_map(|(arch, dim)| {
        let p = arch.n_params(dim);
        (
            prop::collection::vec(-1.5f64..1.5, p),
            prop::collection::vec(-2.0f64..2.0, dim),
        )
            .prop_map(move |(params, x)| (Model::from_params(arch, dim, params).unwrap(), x))
    })
}

fn logistic_problem() -> impl Strategy<Value = (Vec<f64>, Vec<(Vec<f64>, u8, u8)>)> {
    (1usize..4).prop_flat_map(|dim| {
        (
            prop::collection::vec(-1.0f64..1.0, dim + 1),
            prop::collection::vec((prop::collection::vec(-2.0f64..2.0, dim), 0u8..2, 0u8..2), 4..20),
        )
    })
}

fn dataset(rows: &[(Vec<f64>, u8, u8)]) -> TabularDataset {
    let mut protected: Vec<u8> = rows.iter().map(|r| r.2).collect();
    protected[0] = 0;
    protected[1] = 1;
    TabularDataset::new(rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect(), protected)
        .unwrap()
}

fn oracle_score(theta: &[f64], x: &[f64]) -> f64 {
    let (w, b) = theta.split_at(x.len());
    logistic(w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prediction_gradient_matches_finite_differences((model, x) in model_and_input()) {
        let analytic = model.grad_prediction(&x).unwrap();
        let fd = fd_gradient(|p| model.with_params(p.to_vec()).unwrap().predict(&x).unwrap(), model.params(), 1e-5);
        if fd.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-8 {
            prop_assert!(rel_error(&analytic, &fd) < 1e-4);
        }
    }

    #[test]
    fn regularized_objective_gradient_matches_oracle(
        (theta, rows) in logistic_problem(),
        lambda in 0.0f64..5.0,
        gamma in 0.1f64..1.0,
    ) {
        let data = dataset(&rows);
        let dim = data.dim();
        let model = Model::from_params(Architecture::Logistic, dim, theta.clone()).unwrap();
        let kernel = Kernel::Gaussian { bandwidth: gamma };
        let mut analytic = model.grad_task_loss(&data).unwrap();
        let fair = mmd_squared_grad(&model, &data, &FairnessSpec::default(), &kernel).unwrap().grad;
        for (a, f) in analytic.iter_mut().zip(&fair) {
            *a += lambda * f;
        }
        let objective = |p: &[f64]| {
            let mut loss = 0.0;
            let (mut s0, mut s1) = (Vec::new(), Vec::new());
            for i in 0..data.len() {
                let h = oracle_score(p, data.row(i)).clamp(1e-7, 1.0 - 1e-7);
                loss -= if data.label(i) == 1 { h.ln() } else { (1.0 - h).ln() };
                if data.protected(i) == 0 { s0.push(oracle_score(p, data.row(i))) } else { s1.push(oracle_score(p, data.row(i))) }
            }
            loss / data.len() as f64 + lambda * naive_mmd_squared(&s0, &s1, RefKernel::Gaussian(gamma))
        };
        let fd = fd_gradient(objective, &theta, 1e-5);
        prop_assert!(rel_error(&analytic, &fd) < 1e-4);
    }

    #[test]
    fn logistic_score_is_lipschitz_in_parameters(
        (theta, rows) in logistic_problem(),
        delta in prop::collection::vec(-0.5f64..0.5, 4),
    ) {
        let dim = rows[0].0.len();
        let other: Vec<f64> = theta.iter().zip(delta.iter().cycle()).map(|(t, d)| t + d).collect();
        let dist = theta.iter().zip(&other).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let m = Model::from_params(Architecture::Logistic, dim, theta).unwrap();
        let n = Model::from_params(Architecture::Logistic, dim, other).unwrap();
        for (x, _, _) in &rows {
            let c = 0.25 * (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let gap = (m.predict(x).unwrap() - n.predict(x).unwrap()).abs();
            prop_assert!(gap <= c * dist + 1e-12);
        }
    }
}

#[test]
fn three_parameter_toy_matches_oracle() {
    let data = TabularDataset::new(
        vec![vec![0.5, -1.0], vec![1.5, 0.2], vec![-0.3, 0.8], vec![0.9, 0.9], vec![-1.2, -0.4]],
        vec![1, 0, 1, 1, 0],
        vec![0, 0, 1, 1, 1],
    )
    .unwrap();
    let theta = vec![0.4, -0.7, 0.1];
    let model = Model::from_params(Architecture::Logistic, 2, theta.clone()).unwrap();
    let analytic = mmd_squared_grad(&model, &data, &FairnessSpec::default(), &Kernel::Gaussian { bandwidth: 0.3 })
        .unwrap()
        .grad;
    let fd = fd_gradient(
        |p| {
            let s0: Vec<f64> = (0..2).map(|i| oracle_score(p, data.row(i))).collect();
            let s1: Vec<f64> = (2..5).map(|i| oracle_score(p, data.row(i))).collect();
            naive_mmd_squared(&s0, &s1, RefKernel::Gaussian(0.3))
        },
        &theta,
        1e-5,
    );
    assert!(rel_error(&analytic, &fd) < 1e-4);
}

//! Central finite-difference checks for the cells and every full model.
//! The heavier many-seed sweep lives in the acceptance suite; this file
//! keeps a fast always-on version.

mod common;

use common::{random_dialogue, tiny_model, XorShift};
use mrnn_core::corpus::EncodedDialogue;
use mrnn_core::models::{ModelInstance, ModelKind};
use mrnn_core::neural::{check_gradients, CellSpec, Gate, Graph, GradientSet, Init, ParameterSet};

/// Analytic gradient of the summed log-likelihood for one dialogue.
fn dialogue_gradients(
    model: &ModelInstance<f64>,
    dialogue: &EncodedDialogue,
) -> (f64, GradientSet<f64>) {
    let (graph, root) =
        mrnn_core::models::dialogue_log_likelihood_graph(model, dialogue).unwrap();
    let value = graph.value(root).item();
    (value, graph.backward(root).unwrap())
}

fn check_model(kind: ModelKind, seeds: std::ops::Range<u64>, tol: f64) {
    let mut rng = XorShift(0x600df00d ^ seeds.start);
    for seed in seeds {
        let mut model = tiny_model(kind, seed);
        let d = random_dialogue(
            &mut rng,
            1 + (seed as usize % 2),
            3,
            model.config.natural_vocab_size,
            kind.needs_coarse().then_some(model.config.coarse_vocab_size),
        );
        let (_, analytic) = dialogue_gradients(&model, &d);
        let d2 = d.clone();
        let max_rel = {
            let config = model.config.clone();
            let nat = model.natural_vocab.clone();
            let crs = model.coarse_vocab.clone();
            check_gradients(&mut model.params, &analytic, 1e-5, move |ps| {
                let probe = ModelInstance::from_parts(
                    config.clone(),
                    ps.clone(),
                    nat.clone(),
                    crs.clone(),
                )?;
                let report = mrnn_core::models::score_dialogue(&probe, &d2)?;
                Ok(report.joint)
            })
            .unwrap()
        };
        assert!(max_rel < tol, "{kind:?} seed {seed}: max rel err {max_rel}");
    }
}

#[test]
fn gru_cell_gradients() {
    let spec = CellSpec::new(Gate::Gru, 2, 3, "g");
    for seed in 0..10 {
        let mut ps = ParameterSet::<f64>::new();
        ps.register("h0", &[3], Init::Gaussian(0.5)).unwrap();
        ps.register("x", &[2], Init::Gaussian(0.8)).unwrap();
        spec.register(&mut ps).unwrap();
        ps.initialize(seed);

        let loss = |ps: &ParameterSet<f64>| -> mrnn_core::Result<f64> {
            let mut g = Graph::new(ps);
            let h = g.param("h0")?;
            let x = g.param("x")?;
            let next = spec.step(&mut g, h, x)?;
            let sq = g.mul(next, next)?;
            let mut total = g.slice(sq, 0, 1)?;
            for i in 1..3 {
                let s = g.slice(sq, i, 1)?;
                total = g.add(total, s)?;
            }
            Ok(g.value(total).item())
        };
        let analytic = {
            let mut g = Graph::new(&ps);
            let h = g.param("h0").unwrap();
            let x = g.param("x").unwrap();
            let next = spec.step(&mut g, h, x).unwrap();
            let sq = g.mul(next, next).unwrap();
            let mut total = g.slice(sq, 0, 1).unwrap();
            for i in 1..3 {
                let s = g.slice(sq, i, 1).unwrap();
                total = g.add(total, s).unwrap();
            }
            g.backward(total).unwrap()
        };
        let max_rel = check_gradients(&mut ps, &analytic, 1e-5, loss).unwrap();
        assert!(max_rel < 1e-4, "seed {seed}: {max_rel}");
    }
}

#[test]
fn lstm_cell_gradients() {
    let spec = CellSpec::new(Gate::Lstm, 3, 2, "l");
    for seed in 0..10 {
        let mut ps = ParameterSet::<f64>::new();
        ps.register("s0", &[4], Init::Gaussian(0.5)).unwrap();
        ps.register("x", &[3], Init::Gaussian(0.8)).unwrap();
        spec.register(&mut ps).unwrap();
        ps.initialize(100 + seed);

        let run = |ps: &ParameterSet<f64>, want_grads: bool| -> (f64, Option<GradientSet<f64>>) {
            let mut g = Graph::new(ps);
            let s = g.param("s0").unwrap();
            let x = g.param("x").unwrap();
            let next = spec.step(&mut g, s, x).unwrap();
            let sq = g.mul(next, next).unwrap();
            let mut total = g.slice(sq, 0, 1).unwrap();
            for i in 1..4 {
                let si = g.slice(sq, i, 1).unwrap();
                total = g.add(total, si).unwrap();
            }
            let v = g.value(total).item();
            let grads = want_grads.then(|| g.backward(total).unwrap());
            (v, grads)
        };
        let (_, analytic) = run(&ps, true);
        let max_rel =
            check_gradients(&mut ps, &analytic.unwrap(), 1e-5, |ps| Ok(run(ps, false).0)).unwrap();
        assert!(max_rel < 1e-4, "seed {seed}: {max_rel}");
    }
}

#[test]
fn rnnlm_gradients() {
    check_model(ModelKind::Rnnlm, 0..4, 1e-4);
}

#[test]
fn hred_gradients() {
    check_model(ModelKind::Hred, 10..13, 1e-4);
}

#[test]
fn hred_actent_gradients() {
    check_model(ModelKind::HredActEnt, 20..23, 1e-4);
}

#[test]
fn mrrnn_gradients() {
    check_model(ModelKind::MrRnn, 30..33, 1e-4);
}

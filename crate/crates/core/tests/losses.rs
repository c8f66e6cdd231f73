use proptest::prelude::*;

use koopman_core::diffcore::{Tape, Tensor};
use koopman_core::dynamics::{generate_dataset, Equation, EquationName, Split};
use koopman_core::koopman::{Activation, FormKind, KoopmanModel, Mlp, MlpConfig, ModelConfig, OperatorForm};
use koopman_core::losses::{
    total_loss, Accuracy, Auxiliary, Batch, Embedding, IsometrySamples, LossConfig, LossState, OperatorLoss,
};

/// `x ↦ relu(x) − relu(−x)`, an exact identity map with one ReLU layer.
fn identity_mlp(width: usize) -> Mlp {
    let mut w1 = vec![0.0; width * 2 * width];
    let mut w2 = vec![0.0; 2 * width * width];
    for i in 0..width {
        w1[i * 2 * width + i] = 1.0;
        w1[i * 2 * width + width + i] = -1.0;
        w2[i * width + i] = 1.0;
        w2[(width + i) * width + i] = -1.0;
    }
    Mlp {
        config: MlpConfig { widths: vec![width, 2 * width, width], activation: Activation::Relu, seed: 0 },
        weights: vec![
            Tensor::param(vec![width, 2 * width], w1).unwrap(),
            Tensor::param(vec![2 * width, width], w2).unwrap(),
        ],
        biases: vec![
            Tensor::param(vec![1, 2 * width], vec![0.0; 2 * width]).unwrap(),
            Tensor::param(vec![1, width], vec![0.0; width]).unwrap(),
        ],
    }
}

fn identity_model() -> KoopmanModel {
    let op = OperatorForm::tridiagonal(vec![1.0, 1.0], vec![0.0], vec![0.0]).unwrap();
    KoopmanModel::from_parts(identity_mlp(2), op, identity_mlp(2), 0).unwrap()
}

/// Three copies of the pendulum's resting state over four steps.
fn constant_batch() -> Batch {
    Batch { size: 3, n_steps: 4, state_dim: 2, states: vec![0.0; 5 * 3 * 2] }
}

fn all_terms() -> Vec<LossConfig> {
    let mut out = Vec::new();
    for accuracy in [Accuracy::Full, Accuracy::Max, Accuracy::Discounted(0.5)] {
        out.push(LossConfig { accuracy, ..LossConfig::default() });
    }
    for embedding in [Embedding::Reconstruction, Embedding::Consistency, Embedding::Metric] {
        out.push(LossConfig { embedding, ..LossConfig::default() });
    }
    for operator in [OperatorLoss::Norm, OperatorLoss::Isometry, OperatorLoss::Unitary, OperatorLoss::Determinant] {
        out.push(LossConfig { operator, ..LossConfig::default() });
    }
    out.push(LossConfig {
        operator: OperatorLoss::Isometry,
        isometry_source: IsometrySamples::EncodedStates,
        ..LossConfig::default()
    });
    for auxiliary in [Auxiliary::AbsoluteMax, Auxiliary::Energy] {
        out.push(LossConfig { auxiliary, ..LossConfig::default() });
    }
    out
}

#[test]
fn every_term_vanishes_on_its_zero_case() {
    let model = identity_model();
    let batch = constant_batch();
    for cfg in all_terms() {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape).unwrap();
        let obj = total_loss(&mut tape, &bound, &batch, &cfg, &mut LossState::new(1)).unwrap();
        let b = obj.breakdown;
        assert_eq!(b.accuracy, 0.0, "{cfg:?}");
        for term in [b.embedding, b.auxiliary].into_iter().flatten() {
            assert_eq!(term, 0.0, "{cfg:?}");
        }
        if let Some(op) = b.operator {
            assert!(op < 1e-24, "{cfg:?}: {op}");
        }
    }
}

#[test]
fn identity_encoder_is_metric_preserving_on_moving_states() {
    let eq = Equation::new(EquationName::Shm);
    let ds = generate_dataset(&eq, 6, 3, 0.2, 2, Split::Train).unwrap();
    let refs: Vec<_> = ds.trajectories.iter().collect();
    let batch = Batch::from_trajectories(&refs).unwrap();
    let cfg = LossConfig { embedding: Embedding::Metric, ..LossConfig::default() };
    let mut tape = Tape::new();
    let bound = identity_model().bind(&mut tape).unwrap();
    let obj = total_loss(&mut tape, &bound, &batch, &cfg, &mut LossState::new(3)).unwrap();
    assert_eq!(obj.breakdown.embedding, Some(0.0));
    assert!(obj.breakdown.accuracy > 0.0);
}

#[test]
fn isometry_of_zero_operator_is_mean_fourth_power() {
    let z = vec![1.0, 2.0, 0.5, -1.0, 3.0, 0.0];
    let mut tape = Tape::new();
    let k = tape.constant(vec![2, 2], vec![0.0; 4]).unwrap();
    let zv = tape.constant(vec![3, 2], z.clone()).unwrap();
    let loss = koopman_core::losses::terms::isometry_loss(&mut tape, k, zv).unwrap();
    let expected = z.chunks(2).map(|r| (r[0] * r[0] + r[1] * r[1]).powi(2)).sum::<f64>() / 3.0;
    assert_eq!(tape.scalar(loss), expected);
}

#[test]
fn unitary_loss_is_zero_exactly_for_orthogonal_rows() {
    let (c, s) = (0.6, 0.8);
    let cases: [(Vec<f64>, bool); 4] = [
        (vec![c, s, -s, c], true),
        (vec![0.0, 1.0, 1.0, 0.0], true),
        (vec![c, s, s, c], false),
        (vec![1.0 + 1e-3, 0.0, 0.0, 1.0], false),
    ];
    for (k, orthogonal) in cases {
        let mut tape = Tape::new();
        let kv = tape.constant(vec![2, 2], k.clone()).unwrap();
        let lv = koopman_core::losses::terms::unitary_loss(&mut tape, kv).unwrap();
        let loss = tape.scalar(lv);
        let kkt = [
            k[0] * k[0] + k[1] * k[1] - 1.0,
            k[0] * k[2] + k[1] * k[3],
            k[2] * k[0] + k[3] * k[1],
            k[2] * k[2] + k[3] * k[3] - 1.0,
        ];
        let gap = kkt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(loss < 1e-12, orthogonal, "{k:?}: loss {loss}");
        assert_eq!(gap < 1e-12, orthogonal);
        assert!((loss - kkt.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_term_is_non_negative(seed in any::<u64>(), form_ix in 0usize..3, d_ix in 0usize..3) {
        let form = FormKind::ALL[form_ix];
        let d = [2, 4, 6][d_ix];
        let eq = Equation::new(EquationName::Pendulum);
        let ds = generate_dataset(&eq, 4, 5, 0.1, seed, Split::Train).unwrap();
        let refs: Vec<_> = ds.trajectories.iter().collect();
        let batch = Batch::from_trajectories(&refs).unwrap();
        let model = KoopmanModel::new(ModelConfig { hidden: Some(vec![8, 8]), ..ModelConfig::new(2, d, form, seed) }).unwrap();
        for cfg in all_terms() {
            if cfg.operator == OperatorLoss::Determinant && form == FormKind::Dense {
                continue;
            }
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape).unwrap();
            let obj = total_loss(&mut tape, &bound, &batch, &cfg, &mut LossState::new(seed)).unwrap();
            let b = obj.breakdown;
            prop_assert!(b.accuracy >= 0.0 && b.total >= 0.0);
            for term in [b.embedding, b.operator, b.auxiliary].into_iter().flatten() {
                prop_assert!(term >= 0.0, "{:?}: {}", cfg, term);
            }
        }
    }
}

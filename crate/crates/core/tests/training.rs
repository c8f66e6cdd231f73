use koopman_core::dynamics::{generate_dataset, Dataset, Equation, EquationName, Split};
use koopman_core::koopman::{FormKind, KoopmanModel, ModelConfig};
use koopman_core::training::{evaluate, fit, RunStatus, TrainConfig};

fn data(n_steps: usize) -> (Dataset, Dataset) {
    let eq = Equation::new(EquationName::Shm);
    let train = generate_dataset(&eq, 16, n_steps, 0.1, 5, Split::Train).unwrap();
    let test = generate_dataset(&eq, 4, n_steps, 0.1, 5, Split::Test).unwrap();
    (train, test)
}

fn model(form: FormKind) -> KoopmanModel {
    KoopmanModel::new(ModelConfig { hidden: Some(vec![8, 8]), ..ModelConfig::new(2, 4, form, 11) }).unwrap()
}

fn values(m: &KoopmanModel) -> Vec<f64> {
    m.params().iter().flat_map(|t| t.values().to_vec()).collect()
}

fn quick() -> TrainConfig {
    TrainConfig { epochs: 3, batch_size: 8, timing: false, ..TrainConfig::default() }
}

#[test]
fn evaluation_leaves_model_untouched() {
    let (_, test) = data(5);
    let m = model(FormKind::Jordan);
    let before = m.clone();
    let a = evaluate(&m, &test).unwrap();
    let b = evaluate(&m, &test).unwrap();
    assert_eq!(a, b);
    assert!(a.is_finite() && a > 0.0);
    assert_eq!(m, before);
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let (train, test) = data(5);
    for form in FormKind::ALL {
        let mut m = model(form);
        let before = values(&m);
        let cfg = TrainConfig { learning_rate: 0.0, clip: None, ..quick() };
        let h = fit(&mut m, &train, &test, &cfg).unwrap();
        assert_eq!(values(&m), before, "{form}");
        let e = h.records.iter().map(|r| r.test_error).collect::<Vec<_>>();
        assert!(e.windows(2).all(|w| w[0] == w[1]), "{form}: {e:?}");
    }
}

#[test]
fn training_is_deterministic_and_finite() {
    let (train, test) = data(5);
    for form in FormKind::ALL {
        let (mut a, mut b) = (model(form), model(form));
        let ha = fit(&mut a, &train, &test, &quick()).unwrap();
        let hb = fit(&mut b, &train, &test, &quick()).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(
            values(&a).iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            values(&b).iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(ha.status, RunStatus::Ok);
        assert_eq!(ha.epoch_losses.len(), 3);
        assert!(ha.epoch_losses.iter().all(|l| l.is_finite()));
        assert_eq!(ha.records.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_ne!(values(&a), values(&model(form)));
    }
}

#[test]
fn divergence_fills_remaining_epochs() {
    let (train, test) = data(200);
    let mut m = model(FormKind::Dense);
    let cfg = TrainConfig { learning_rate: 10.0, ..quick() };
    let h = fit(&mut m, &train, &test, &cfg).unwrap();
    let RunStatus::Diverged { epoch, .. } = h.status else { panic!("{:?}", h.status) };
    assert_eq!(h.records.len(), 3);
    for r in &h.records {
        if r.epoch >= epoch {
            assert_eq!(r.test_error, f64::INFINITY);
            assert!(r.train.is_none());
        } else {
            assert!(r.test_error.is_finite());
        }
    }
}

use bie_core::neuralops::*;
use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// `‖g − g_fd‖∞ / ‖g_fd‖∞` for `θ ↦ Σ w ⊙ out(θ)`.
fn fd_error(eval: impl Fn(&[f64]) -> f64, params: &[f64], grad: &[f64]) -> f64 {
    let h = 1e-6;
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = eval(&p);
        p[i] = orig - h;
        let down = eval(&p);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs());
        scale = scale.max(fd.abs());
    }
    worst / scale
}

fn tdonet(scale: f64) -> OperatorModel {
    OperatorModel::TdoNet(
        TdoNetSpec::new(
            FnnSpec::tanh(&[8, 16, 4]).unwrap(),
            FnnSpec::tanh(&[4, 16, 4]).unwrap(),
            FnnSpec::tanh(&[8, 16, 6]).unwrap(),
            scale,
        )
        .unwrap(),
    )
}

fn deeponet() -> OperatorModel {
    OperatorModel::DeepOnet(DeepOnetSpec::uniform(6, 5, &[7]).unwrap())
}

#[test]
fn fnn_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for draw in 0..20 {
        let spec = FnnSpec::tanh(&[5, 9, 7, 3]).unwrap();
        let params = spec.init(&mut rng);
        let x = random(4, 5, &mut rng);
        let w = random(4, 3, &mut rng);
        let g = spec.vjp(&params, &x, &w).unwrap();
        let eval = |p: &[f64]| (spec.forward(p, &x).unwrap() * &w).sum();
        let e = fd_error(eval, &params, &g);
        assert!(e <= 1e-5, "draw {draw}: {e}");
    }
}

#[test]
fn operator_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for model in [tdonet(1.0), tdonet(0.1), deeponet()] {
        let (gw, fw, ow) = model.io_widths();
        for draw in 0..20 {
            let params = model.init(rng.random());
            let gamma = random(3, gw, &mut rng);
            let f = random(3, fw, &mut rng);
            let w = random(3, ow, &mut rng);
            let g = model.vjp(&params, &gamma, &f, &w).unwrap();
            let eval = |p: &[f64]| (model.forward(p, &gamma, &f).unwrap() * &w).sum();
            let e = fd_error(eval, &params, &g);
            assert!(e <= 1e-5, "{} draw {draw}: {e}", model.name());
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for model in [tdonet(0.1), deeponet()] {
        let (gw, fw, ow) = model.io_widths();
        let params = model.init(9);
        let data = OperatorData {
            gamma: random(70, gw, &mut rng),
            f: random(70, fw, &mut rng),
            target: random(70, ow, &mut rng),
        };
        let (_, g) = loss_and_grad(&model, &params, &data).unwrap();
        let eval = |p: &[f64]| loss_relative(&model.forward(p, &data.gamma, &data.f).unwrap(), &data.target).unwrap().0;
        assert!(fd_error(eval, &params, &g) <= 1e-5);
    }
}

fn sigma_constant(model: &OperatorModel, params: &mut [f64], value: f64) {
    let OperatorModel::TdoNet(s) = model else { unreachable!() };
    let start = s.v_net.param_count();
    let sigma = &mut params[start..start + s.sigma_net.param_count()];
    let w = &s.sigma_net.widths;
    let (nin, nout) = (w[w.len() - 2], w[w.len() - 1]);
    let len = sigma.len();
    sigma[len - nout - nin * nout..len - nout].fill(0.0);
    sigma[len - nout..].fill(value);
}

#[test]
fn hadamard_identity_and_annihilation() {
    let model = tdonet(1.0);
    let OperatorModel::TdoNet(s) = &model else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut params = model.init(5);
    let gamma = random(3, 4, &mut rng);
    let f = random(3, 4, &mut rng);
    let pv = params[..s.v_net.param_count()].to_vec();
    let pu = params[s.v_net.param_count() + s.sigma_net.param_count()..].to_vec();

    sigma_constant(&model, &mut params, 1.0);
    let v = s.v_net.forward(&pv, &concatenate![Axis(1), gamma, f]).unwrap();
    let want = s.u_net.forward(&pu, &concatenate![Axis(1), gamma, v]).unwrap();
    let got = model.forward(&params, &gamma, &f).unwrap();
    assert!((&got - &want).iter().all(|d| d.abs() < 1e-14));

    sigma_constant(&model, &mut params, 0.0);
    let zero = Array2::zeros((3, 4));
    let want = s.u_net.forward(&pu, &concatenate![Axis(1), gamma, zero]).unwrap();
    let a = model.forward(&params, &gamma, &f).unwrap();
    let b = model.forward(&params, &gamma, &random(3, 4, &mut rng)).unwrap();
    assert_eq!(a, want);
    assert_eq!(a, b);
}

#[test]
fn output_scale_multiplies_the_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = tdonet(1.0).init(7);
    let gamma = random(2, 4, &mut rng);
    let f = random(2, 4, &mut rng);
    let one = tdonet(1.0).forward(&params, &gamma, &f).unwrap();
    let tenth = tdonet(0.1).forward(&params, &gamma, &f).unwrap();
    assert!((&one * 0.1 - &tenth).iter().all(|d| d.abs() < 1e-15));
}

#[test]
fn deeponet_reduces_to_branch_sum() {
    let model = deeponet();
    let OperatorModel::DeepOnet(s) = &model else { unreachable!() };
    let mut params = model.init(8);
    let (a, b, c) = (
        s.branch_gamma.param_count(),
        s.branch_gamma.param_count() + s.branch_f.param_count(),
        model.param_count() - 1,
    );
    // Force the f branch and the trunk to output ones.
    for (hi, width) in [(b, 7), (c, 7)] {
        let q = 5;
        params[hi - q - width * q..hi - q].fill(0.0);
        params[hi - q..hi].fill(1.0);
    }
    params[c] = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gamma = random(2, 12, &mut rng);
    let f = random(2, 6, &mut rng);
    let bg = s.branch_gamma.forward(&params[..a], &gamma).unwrap();
    let out = model.forward(&params, &gamma, &f).unwrap();
    for i in 0..2 {
        let want = bg.row(i).sum() + 0.3;
        assert!(out.row(i).iter().all(|v| (v - want).abs() < 1e-13));
        let pt = model.deeponet_at(&params, gamma.row(i).as_slice().unwrap(), f.row(i).as_slice().unwrap(), 1.234).unwrap();
        assert!((pt - want).abs() < 1e-13);
    }
}

#[test]
fn reference_deeponet_input_widths() {
    let s = DeepOnetSpec::uniform(128, 300, &[300, 300, 300]).unwrap();
    assert_eq!(s.branch_gamma.widths, vec![256, 300, 300, 300, 300]);
    assert_eq!(s.branch_f.widths, vec![128, 300, 300, 300, 300]);
    assert_eq!(s.trunk.widths, vec![1, 300, 300, 300, 300]);
    let t = TdoNetSpec::uniform(82, 41, 41, 41, &[300, 300, 300, 300], 1.0).unwrap();
    assert_eq!(t.v_net.widths[0], 123);
    assert_eq!(t.u_net.widths[0], 123);
}

fn toy_data(count: usize, seed: u64) -> OperatorData {
    // target = f scaled by a γ-dependent factor: a smooth operator family
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = random(count, 4, &mut rng);
    let f = random(count, 4, &mut rng);
    let mut target = Array2::zeros((count, 6));
    for i in 0..count {
        let s = 1.0 + 0.5 * gamma[(i, 0)];
        for j in 0..4 {
            target[(i, j)] = s * f[(i, j)];
        }
        target[(i, 4)] = gamma[(i, 1)] * f[(i, 2)];
        target[(i, 5)] = 0.3;
    }
    OperatorData { gamma, f, target }
}

#[test]
fn overfits_a_small_set() {
    let data = toy_data(32, 10);
    let model = OperatorModel::TdoNet(TdoNetSpec::uniform(4, 4, 6, 16, &[32, 32], 1.0).unwrap());
    let cfg = TrainConfig {
        batch_size: 32,
        epochs: 5000,
        lr0: 1e-3,
        schedule: Schedule::PlateauHalve {
            patience_fraction: 0.01,
            factor: 0.5,
        },
        adam: AdamParams::default(),
        seed: 1,
    };
    let r = train(&model, &data, &data, &cfg).unwrap();
    let first_below = r.log.iter().find(|e| e.train_loss <= 1e-3).map(|e| e.epoch);
    assert!(first_below.is_some(), "final train loss {}", r.log.last().unwrap().train_loss);
    assert!(r.log.windows(2).all(|w| w[1].lr <= w[0].lr));
}

#[test]
fn training_is_bitwise_deterministic() {
    let train_set = toy_data(100, 11);
    let test_set = toy_data(20, 12);
    let model = small_tdonet();
    let cfg = TrainConfig {
        batch_size: 16,
        epochs: 5,
        lr0: 1e-3,
        schedule: Schedule::InverseTimeStaircase {
            period_fraction: 0.1,
            factor: 0.5,
        },
        adam: AdamParams::default(),
        seed: 3,
    };
    let a = train(&model, &train_set, &test_set, &cfg).unwrap();
    let b = train(&model, &train_set, &test_set, &cfg).unwrap();
    let bits = |r: &TrainResult| -> Vec<u64> {
        r.log
            .iter()
            .flat_map(|e| [e.train_loss.to_bits(), e.test_loss.to_bits(), e.lr.to_bits()])
            .chain(r.final_params.iter().map(|p| p.to_bits()))
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert!(a.log.last().unwrap().lr < cfg.lr0);
}

fn small_tdonet() -> OperatorModel {
    OperatorModel::TdoNet(TdoNetSpec::uniform(4, 4, 6, 8, &[12], 1.0).unwrap())
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for model in [tdonet(0.1), deeponet()] {
        let ck = Checkpoint {
            params: model.init(4),
            model,
            epochs_run: 12,
            best_epoch: 7,
            best_test_loss: 0.125,
        };
        let path = dir.path().join("m.biop");
        ck.write(&path).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap(), ck);
        let mut bytes = ck.to_bytes();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}

#[test]
fn training_log_csv() {
    let log = vec![
        EpochLog {
            epoch: 0,
            train_loss: 0.5,
            test_loss: 0.6,
            lr: 1e-3,
        },
        EpochLog {
            epoch: 1,
            train_loss: 0.25,
            test_loss: 0.3,
            lr: 1e-3,
        },
    ];
    let mut buf = Vec::new();
    write_training_log(&log, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,train_loss,test_loss,lr\n0,0.5,0.6,0.001\n1,0.25,0.3,0.001\n"
    );
}

#[test]
fn evaluate_oracle_and_zero_models() {
    struct Oracle(Array2<f64>);
    impl Predictor for Oracle {
        fn predict(&self, _: &Array2<f64>, _: &Array2<f64>) -> bie_core::Result<Array2<f64>> {
            Ok(self.0.clone())
        }
    }
    let data = toy_data(50, 13);
    let (m, _) = evaluate(&Oracle(data.target.clone()), &data).unwrap();
    assert_eq!([m.mne, m.mre, m.var_mne, m.var_mre], [0.0; 4]);
    let (z, _) = evaluate(&Oracle(Array2::zeros(data.target.dim())), &data).unwrap();
    assert!((z.mre - 1.0).abs() <= 1e-12 && z.var_mre <= 1e-24);
}

use super::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn actor_shapes() -> Vec<LayerShape> {
    vec![LayerShape::new(13, 13), LayerShape::new(13, 32), LayerShape::new(32, 8)]
}

fn critic_shapes() -> Vec<LayerShape> {
    vec![LayerShape::new(13, 13), LayerShape::new(13, 32), LayerShape::new(32, 1)]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn zero_rates_give_full_mask() {
    let shapes = actor_shapes();
    let mask = make_mask(&shapes, &[0.0, 0.0, 0.0], 1).unwrap();
    assert_eq!(mask, Mask::full(&shapes));
}

#[test]
fn rates_hit_exact_per_matrix_counts() {
    let shapes = actor_shapes();
    let mask = make_mask(&shapes, &[0.2, 0.4, 0.6], 1).unwrap();
    assert_eq!(mask.zeros_in_matrix(0), (169.0f64 * 0.2).round() as usize);
    assert_eq!(mask.zeros_in_matrix(1), (416.0f64 * 0.4).round() as usize);
    assert_eq!(mask.zeros_in_matrix(2), (256.0f64 * 0.6).round() as usize);
    // biases stay retained
    for l in 0..3 {
        let off = bias_offset(&shapes, l);
        for i in 0..shapes[l].outputs {
            assert!(mask.retained(off + i));
        }
    }
}

#[test]
fn mask_is_seed_deterministic_with_equal_counts_across_seeds() {
    let shapes = actor_shapes();
    let a = make_mask(&shapes, &[0.2, 0.4, 0.6], 5).unwrap();
    let b = make_mask(&shapes, &[0.2, 0.4, 0.6], 5).unwrap();
    assert_eq!(a, b);
    let c = make_mask(&shapes, &[0.2, 0.4, 0.6], 6).unwrap();
    assert_ne!(a, c);
    for l in 0..3 {
        assert_eq!(a.zeros_in_matrix(l), c.zeros_in_matrix(l));
    }
}

#[test]
fn invalid_rates_rejected() {
    let shapes = actor_shapes();
    assert!(make_mask(&shapes, &[0.2, 0.4], 1).is_err());
    assert!(make_mask(&shapes, &[0.2, 0.4, 1.0], 1).is_err());
    assert!(make_mask(&shapes, &[0.2, -0.1, 0.4], 1).is_err());
}

#[test]
fn zero_input_zero_biases_give_zero_logits() {
    let shapes = actor_shapes();
    let model = MaskedModel::new(shapes.clone(), vec![0.0; param_len(&shapes)], Mask::full(&shapes));
    let (out, _) = model.forward(&[0.0; 13]);
    assert_eq!(out, vec![0.0; 8]);
}

#[test]
fn outputs_finite_for_random_inputs() {
    let mut r = rng(3);
    let model = MaskedModel::dense(&actor_shapes(), &mut r);
    for _ in 0..100 {
        let x: Vec<f64> = (0..13).map(|_| r.gen_range(-10.0..10.0)).collect();
        let (out, _) = model.forward(&x);
        assert!(out.iter().all(|v| v.is_finite()));
    }
}

/// Pure-structural rates for the actor shapes: unit removals alone hit the
/// targets exactly (k = [2, 3], no element top-up).
fn structural_rates() -> [f64; 3] {
    [26.0 / 169.0, 97.0 / 416.0, 24.0 / 256.0]
}

#[test]
fn masked_forward_equals_physically_shrunk_network() {
    let shapes = actor_shapes();
    let mut r = rng(11);
    let params = xavier_params(&shapes, &mut r);
    let mask = make_mask(&shapes, &structural_rates(), 9).unwrap();
    let model = MaskedModel::new(shapes.clone(), params, mask.clone());

    // reconstruct removed units: all-zero incoming row and outgoing column
    let removed: Vec<Vec<usize>> = (0..2)
        .map(|h| {
            (0..shapes[h].outputs)
                .filter(|&u| {
                    let row_off = weight_offset(&shapes, h) + u * shapes[h].inputs;
                    let row_dead =
                        (0..shapes[h].inputs).all(|i| !mask.retained(row_off + i));
                    let col_dead = (0..shapes[h + 1].outputs).all(|o| {
                        !mask.retained(weight_offset(&shapes, h + 1) + o * shapes[h + 1].inputs + u)
                    });
                    row_dead && col_dead
                })
                .collect()
        })
        .collect();
    assert_eq!(removed[0].len(), 2);
    assert_eq!(removed[1].len(), 3);

    let keep: Vec<Vec<usize>> = (0..2)
        .map(|h| (0..shapes[h].outputs).filter(|u| !removed[h].contains(u)).collect())
        .collect();

    // build the shrunk dense network
    let shrunk_shapes = vec![
        LayerShape::new(13, keep[0].len()),
        LayerShape::new(keep[0].len(), keep[1].len()),
        LayerShape::new(keep[1].len(), 8),
    ];
    let mut sp = vec![0.0; param_len(&shrunk_shapes)];
    let full_in: Vec<Vec<usize>> = vec![(0..13).collect(), keep[0].clone(), keep[1].clone()];
    let full_out: Vec<Vec<usize>> = vec![keep[0].clone(), keep[1].clone(), (0..8).collect()];
    for l in 0..3 {
        for (o_new, &o_old) in full_out[l].iter().enumerate() {
            for (i_new, &i_old) in full_in[l].iter().enumerate() {
                sp[weight_offset(&shrunk_shapes, l) + o_new * shrunk_shapes[l].inputs + i_new] =
                    model.params()[weight_offset(&shapes, l) + o_old * shapes[l].inputs + i_old];
            }
            sp[bias_offset(&shrunk_shapes, l) + o_new] =
                model.params()[bias_offset(&shapes, l) + o_old];
        }
    }
    let shrunk = MaskedModel::new(shrunk_shapes.clone(), sp, Mask::full(&shrunk_shapes));

    let mut r = rng(12);
    for _ in 0..20 {
        let x: Vec<f64> = (0..13).map(|_| r.gen_range(-5.0..5.0)).collect();
        let (a, _) = model.forward(&x);
        let (b, _) = shrunk.forward(&x);
        assert_eq!(a, b);
    }
}

#[test]
fn mask_absorption() {
    let shapes = actor_shapes();
    let mut r = rng(21);
    let mask = make_mask(&shapes, &[0.3, 0.3, 0.3], 2).unwrap();
    let model = MaskedModel::new(shapes.clone(), xavier_params(&shapes, &mut r), mask.clone());
    let x: Vec<f64> = (0..13).map(|_| r.gen_range(-3.0..3.0)).collect();
    let (want, _) = model.forward(&x);

    // garbage at masked positions is absorbed on re-masking
    let mut garbled = model.params().to_vec();
    for i in 0..garbled.len() {
        if !mask.retained(i) {
            garbled[i] = r.gen_range(-100.0..100.0);
        }
    }
    let mut model2 = model.clone();
    model2.set_params(garbled);
    let (got, _) = model2.forward(&x);
    assert_eq!(want, got);
}

#[test]
fn zero_output_gradient_gives_zero_gradient_set() {
    let mut r = rng(4);
    let model = MaskedModel::dense(&actor_shapes(), &mut r);
    let x: Vec<f64> = (0..13).map(|_| r.gen_range(-1.0..1.0)).collect();
    let (_, cache) = model.forward(&x);
    let g = model.backward(&cache, &[0.0; 8]);
    assert!(g.values.iter().all(|&v| v == 0.0));
}

#[test]
fn gradient_respects_mask_for_any_input() {
    let shapes = actor_shapes();
    let mut r = rng(5);
    let mask = make_mask(&shapes, &[0.2, 0.4, 0.6], 3).unwrap();
    let model = MaskedModel::new(shapes.clone(), xavier_params(&shapes, &mut r), mask.clone());
    for _ in 0..10 {
        let x: Vec<f64> = (0..13).map(|_| r.gen_range(-5.0..5.0)).collect();
        let (_, cache) = model.forward(&x);
        let dout: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = model.backward(&cache, &dout);
        assert!(g.respects_mask(&mask));
    }
}

/// Central finite differences of `loss` with respect to each retained
/// parameter; asserts relative error below `tol` against `analytic`.
fn assert_fd_close(
    model: &MaskedModel,
    loss: &dyn Fn(&MaskedModel) -> f64,
    analytic: &GradientSet,
    tol: f64,
) {
    let h = 1e-6;
    for i in 0..model.params().len() {
        if !model.mask().retained(i) {
            continue;
        }
        let mut plus = model.clone();
        let mut p = plus.params().to_vec();
        p[i] += h;
        plus.set_params(p);
        let mut minus = model.clone();
        let mut p = minus.params().to_vec();
        p[i] -= h;
        minus.set_params(p);
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let denom = fd.abs().max(analytic.values[i].abs()).max(1e-6);
        let rel = (fd - analytic.values[i]).abs() / denom;
        assert!(
            rel < tol,
            "param {i}: analytic {} vs fd {fd} (rel {rel})",
            analytic.values[i]
        );
    }
}

#[test]
fn critic_gradient_matches_finite_differences() {
    let shapes = critic_shapes();
    let mut r = rng(6);
    let mask = make_mask(&shapes, &[0.2, 0.4, 0.6], 4).unwrap();
    let model = MaskedModel::new(shapes.clone(), xavier_params(&shapes, &mut r), mask);
    let x: Vec<f64> = (0..13).map(|_| r.gen_range(-2.0..2.0)).collect();
    let (_, cache) = model.forward(&x);
    let analytic = model.backward(&cache, &[1.0]);
    let xc = x.clone();
    assert_fd_close(&model, &move |m| m.forward(&xc).0[0], &analytic, 1e-4);
}

#[test]
fn actor_gradient_through_log_softmax_matches_finite_differences() {
    let shapes = actor_shapes();
    let mut r = rng(7);
    let model = MaskedModel::dense(&shapes, &mut r);
    let x: Vec<f64> = (0..13).map(|_| r.gen_range(-2.0..2.0)).collect();
    let label = 3usize;
    let (logits, cache) = model.forward(&x);
    let probs = softmax(&logits);
    let mut dout = probs.clone();
    dout[label] -= 1.0;
    let analytic = model.backward(&cache, &dout);
    let xc = x.clone();
    let loss = move |m: &MaskedModel| -> f64 {
        let (logits, _) = m.forward(&xc);
        -log_softmax(&logits)[label]
    };
    assert_fd_close(&model, &loss, &analytic, 1e-4);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let shapes = vec![LayerShape::new(1, 1)];
    let mut model =
        MaskedModel::new(shapes.clone(), vec![1.0, 0.0], Mask::full(&shapes));
    let lr = 0.01;
    let mut g = GradientSet::zeros(2);
    g.values[0] = 0.37;
    g.values[1] = -2.0;
    model.adam_step(&g, lr);
    assert!((model.params()[0] - (1.0 - lr)).abs() < 1e-6);
    assert!((model.params()[1] - lr).abs() < 1e-6);
    assert_eq!(model.adam().step, 1);
}

#[test]
fn masked_parameter_unchanged_after_many_steps() {
    let shapes = actor_shapes();
    let mut r = rng(8);
    let mask = make_mask(&shapes, &[0.2, 0.4, 0.6], 5).unwrap();
    let mut model = MaskedModel::new(shapes.clone(), xavier_params(&shapes, &mut r), mask.clone());
    for _ in 0..100 {
        let mut g = GradientSet {
            values: (0..model.params().len()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        };
        g.apply_mask(&mask);
        model.adam_step(&g, 0.01);
    }
    for i in 0..model.params().len() {
        if !mask.retained(i) {
            assert_eq!(model.params()[i], 0.0);
            assert_eq!(model.adam().m[i], 0.0);
            assert_eq!(model.adam().v[i], 0.0);
        }
    }
    assert_eq!(model.adam().step, 100);
}

#[test]
fn adam_three_step_trajectory_matches_hand_computed_table() {
    // two parameters, lr 0.1, grads per step as in the frozen recurrence
    let shapes = vec![LayerShape::new(1, 1)];
    let mut model = MaskedModel::new(shapes.clone(), vec![1.0, -2.0], Mask::full(&shapes));
    let grads = [[0.5, -1.0], [0.25, -0.5], [-0.5, 1.0]];
    for g in grads {
        model.adam_step(&GradientSet { values: g.to_vec() }, 0.1);
    }
    assert!((model.params()[0] - 0.795703733601093533).abs() < 1e-12);
    assert!((model.params()[1] - (-1.795703731293871012)).abs() < 1e-12);
    assert_eq!(model.adam().step, 3);
}

#[test]
fn checkpoint_round_trip_is_stable() {
    let shapes = actor_shapes();
    let mut r = rng(9);
    let mask = make_mask(&shapes, &[0.2, 0.4, 0.6], 7).unwrap();
    let mut model = MaskedModel::new(shapes.clone(), xavier_params(&shapes, &mut r), mask);
    // give the optimizer some history
    for _ in 0..3 {
        let x: Vec<f64> = (0..13).map(|_| r.gen_range(-2.0..2.0)).collect();
        let (logits, cache) = model.forward(&x);
        let probs = softmax(&logits);
        let mut dout = probs;
        dout[0] -= 1.0;
        let g = model.backward(&cache, &dout);
        model.adam_step(&g, 0.001);
    }
    let bytes = save_model(&model);
    let loaded = load_model(&bytes).unwrap();
    assert_eq!(loaded.shapes(), model.shapes());
    assert_eq!(loaded.mask(), model.mask());
    assert_eq!(loaded.adam().step, model.adam().step);
    // idempotent through the f32 quantization
    assert_eq!(save_model(&loaded), bytes);
}

#[test]
fn corrupt_checkpoints_rejected() {
    let shapes = critic_shapes();
    let model = MaskedModel::dense(&shapes, &mut rng(10));
    let bytes = save_model(&model);
    assert!(load_model(&bytes[..10]).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(load_model(&bad_magic).is_err());
    let mut trailing = bytes;
    trailing.push(0);
    assert!(load_model(&trailing).is_err());
}

#[test]
fn pruned_actor_critic_pair_fits_memory_budget() {
    let mut r = rng(1);
    let rates = [0.2, 0.4, 0.6];
    let a_shapes = actor_shapes();
    let c_shapes = critic_shapes();
    let actor = MaskedModel::new(
        a_shapes.clone(),
        xavier_params(&a_shapes, &mut r),
        make_mask(&a_shapes, &rates, 1).unwrap(),
    );
    let critic = MaskedModel::new(
        c_shapes.clone(),
        xavier_params(&c_shapes, &mut r),
        make_mask(&c_shapes, &rates, 2).unwrap(),
    );
    let total = save_model(&actor).len() + save_model(&critic).len();
    assert!(total <= 16 * 1024, "pruned agent serializes to {total} bytes");

    // the dense pair genuinely exceeds the budget, so the bound is informative
    let dense_total = save_model(&MaskedModel::dense(&a_shapes, &mut r)).len()
        + save_model(&MaskedModel::dense(&c_shapes, &mut r)).len();
    assert!(dense_total > 16 * 1024, "dense agent serializes to {dense_total} bytes");
}

#[test]
fn softmax_and_log_softmax_are_consistent() {
    let logits = [1.5, -0.5, 3.0, 0.0, -2.0, 0.25, 1.0, 2.0];
    let p = softmax(&logits);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let lp = log_softmax(&logits);
    for (a, b) in p.iter().zip(&lp) {
        assert!((a.ln() - b).abs() < 1e-12);
    }
    // extreme logits stay finite
    let p = softmax(&[1000.0, 0.0, -1000.0]);
    assert!(p.iter().all(|v| v.is_finite()));
    assert!((p[0] - 1.0).abs() < 1e-12);
}

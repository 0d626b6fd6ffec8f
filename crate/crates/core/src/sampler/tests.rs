use super::*;
use crate::proposals::{RsgldConfig, RwConfig};
use crate::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

fn four() -> Dataset {
    Dataset::from_scalars(&[0.1, -0.2, 0.3, 0.0]).unwrap()
}

fn unit() -> ModelSpec {
    ModelSpec::gaussian_mean(1, 1.0)
}

/// `log N(x; θ, 1)` written out by hand.
fn ell(theta: f64, x: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * (x - theta) * (x - theta)
}

fn state_at(theta: f64, batch: BatchIndex, spec: &TemperSpec, data: &Dataset) -> ChainState {
    ChainState::new(ParamVector::new(vec![theta]).unwrap(), batch, false, spec, &unit(), data).unwrap()
}

#[test]
fn temper_spec_validation_and_temperature() {
    assert!(TemperSpec::new(10, 0, 1.0).is_err());
    assert!(TemperSpec::new(10, 11, 1.0).is_err());
    assert!(TemperSpec::new(10, 5, 0.0).is_err());
    let s = TemperSpec::new(100_000, 1000, 20.0).unwrap();
    assert_eq!(s.temperature(), 5000.0);
    assert_eq!(s.epoch_len(), 100);
    assert_eq!(TemperSpec::new(10, 3, 1.0).unwrap().epoch_len(), 4);
}

#[test]
fn identity_move_has_zero_log_ratio() {
    let data = four();
    let spec = TemperSpec::new(4, 2, 2.0).unwrap();
    let batch = BatchIndex::from_indices(4, vec![1, 3]).unwrap();
    let s = state_at(0.2, batch.clone(), &spec, &data);
    let r = log_accept_ratio(&s, &[0.2], &batch, -1.5, -1.5, &spec, &unit(), &data).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn full_batch_ratio_matches_posterior_difference() {
    let data = four();
    let spec = TemperSpec::new(4, 4, 4.0).unwrap();
    let full = BatchIndex::full(4);
    let s = state_at(0.05, full.clone(), &spec, &data);
    let r = log_accept_ratio(&s, &[-0.3], &full, 0.0, 0.0, &spec, &unit(), &data).unwrap();
    let xs = [0.1, -0.2, 0.3, 0.0];
    let oracle: f64 = xs.iter().map(|&x| ell(-0.3, x) - ell(0.05, x)).sum();
    assert!((r - oracle).abs() < 1e-12, "{r} vs {oracle}");
}

#[test]
fn scalar_oracle_for_a_batch_swap() {
    let data = four();
    let spec = TemperSpec::new(4, 2, 2.0).unwrap();
    let s = state_at(0.0, BatchIndex::from_indices(4, vec![0, 1]).unwrap(), &spec, &data);
    let proposed = BatchIndex::from_indices(4, vec![2, 3]).unwrap();
    let r = log_accept_ratio(&s, &[0.1], &proposed, 0.0, 0.0, &spec, &unit(), &data).unwrap();
    let new = 2.0 * 0.5 * (ell(0.1, 0.3) + ell(0.1, 0.0));
    let old = 2.0 * 0.5 * (ell(0.0, 0.1) + ell(0.0, -0.2));
    assert!((r - (new - old)).abs() < 1e-14);
}

#[test]
fn non_finite_proposal_density_is_rejected() {
    let data = four();
    let spec = TemperSpec::new(4, 2, 2.0).unwrap();
    let batch = BatchIndex::from_indices(4, vec![0, 1]).unwrap();
    let s = state_at(0.0, batch.clone(), &spec, &data);
    let err = log_accept_ratio(&s, &[0.0], &batch, f64::NEG_INFINITY, 0.0, &spec, &unit(), &data);
    assert!(matches!(err, Err(Error::Contract(_))));
}

#[test]
fn decision_rule() {
    assert!(accept(0.0, 0.999_999));
    assert!(accept(3.0, 0.5));
    assert!(!accept(0.5f64.ln(), 0.99));
    assert!(accept(0.5f64.ln(), 0.3));
    assert!(accept(-700.0, 0.0));
    assert!(!accept(-800.0, 0.0));
}

#[test]
fn rejection_leaves_state_untouched() {
    let data = four();
    let spec = TemperSpec::new(4, 2, 2.0).unwrap();
    let batch = BatchIndex::from_indices(4, vec![0, 1]).unwrap();
    let s = state_at(0.0, batch.clone(), &spec, &data);
    let rw = Proposal::RandomWalk(RwConfig::new(1.0).unwrap());
    // θ′ = 40 is astronomically unlikely, so u = 0.99 rejects
    let (next, rec) = resolve(
        s.clone(),
        ParamVector::new(vec![40.0]).unwrap(),
        Direction::Symmetric,
        BatchIndex::from_indices(4, vec![2, 3]).unwrap(),
        0.99,
        &rw,
        &spec,
        &unit(),
        &data,
    )
    .unwrap();
    assert!(!rec.accepted);
    assert_eq!(next.theta(), s.theta());
    assert_eq!(next.batch(), &batch);
    assert_eq!(next.cached_score(), s.cached_score());
    assert_eq!(next.iteration(), 1);
}

#[test]
fn acceptance_adopts_the_proposal_score() {
    let data = four();
    let spec = TemperSpec::new(4, 2, 2.0).unwrap();
    let s = state_at(0.0, BatchIndex::from_indices(4, vec![0, 1]).unwrap(), &spec, &data);
    let rw = Proposal::RandomWalk(RwConfig::new(1.0).unwrap());
    let proposed = BatchIndex::from_indices(4, vec![3, 2]).unwrap();
    let (next, rec) = resolve(
        s,
        ParamVector::new(vec![0.1]).unwrap(),
        Direction::Symmetric,
        proposed.clone(),
        0.0,
        &rw,
        &spec,
        &unit(),
        &data,
    )
    .unwrap();
    assert!(rec.accepted);
    assert_eq!(next.batch(), &proposed);
    let fresh = 2.0 * unit().batch_mean_loglik(&[0.1], &data, &proposed).unwrap();
    assert_eq!(next.cached_score(), fresh);
}

fn rsgld() -> Proposal {
    Proposal::Rsgld(RsgldConfig::new(1e-3, 2.0, 200).unwrap())
}

#[test]
fn traces_are_bit_reproducible() {
    let model = ModelSpec::gaussian_mean(1, 1.0);
    let data = model.generate_data(&[0.5], 200, 1).unwrap();
    let cfg = ChainConfig {
        proposal: Proposal::RandomWalk(RwConfig::new(0.1).unwrap()),
        spec: TemperSpec::new(200, 20, 10.0).unwrap(),
        iterations: 500,
        seed: 77,
        chain_index: 3,
        thin: 1,
        record_trace: true,
        initial_theta: ParamVector::zeros(1),
    };
    let a = run_chain(&cfg, &model, &data).unwrap();
    let b = run_chain(&cfg, &model, &data).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.snapshots, b.snapshots);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("iter,accepted,direction,log_r,theta_0\n0,,,,"));
    assert_eq!(text.lines().count(), 502);

    let other = run_chain(&ChainConfig { chain_index: 4, ..cfg.clone() }, &model, &data).unwrap();
    assert_ne!(other.snapshots, a.snapshots);
}

#[test]
fn thinning_beyond_the_run_keeps_only_the_initial_snapshot() {
    let model = ModelSpec::gaussian_mean(1, 1.0);
    let data = model.generate_data(&[0.5], 50, 1).unwrap();
    let cfg = ChainConfig {
        proposal: Proposal::RandomWalk(RwConfig::new(0.1).unwrap()),
        spec: TemperSpec::new(50, 5, 5.0).unwrap(),
        iterations: 10,
        seed: 1,
        chain_index: 0,
        thin: 11,
        record_trace: false,
        initial_theta: ParamVector::filled(1, 0.25),
    };
    let t = run_chain(&cfg, &model, &data).unwrap();
    assert_eq!(t.snapshots.len(), 1);
    assert_eq!(t.snapshots[0].theta[0], 0.25);
    assert_eq!(t.counts.total(), 10);
    assert!(run_chain(&ChainConfig { iterations: 0, ..cfg.clone() }, &model, &data).is_err());
    assert!(run_chain(&ChainConfig { initial_theta: ParamVector::zeros(2), ..cfg }, &model, &data).is_err());
}

fn assert_cache_coherent(model: &ModelSpec, data: &Dataset, proposal: Proposal, theta0: ParamVector, steps: usize) {
    let spec = TemperSpec::new(data.len(), data.len() / 5, 10.0).unwrap();
    let mut chain = Chain::new(model, data, proposal, spec, theta0, 5, 0).unwrap();
    for _ in 0..steps {
        let before = chain.state().clone();
        let rec = chain.step().unwrap();
        let s = chain.state();
        if !rec.accepted {
            assert_eq!(s.theta(), before.theta());
            assert_eq!(s.batch(), before.batch());
            assert_eq!(s.cached_score(), before.cached_score());
        }
        let fresh = spec.c_n * model.batch_mean_loglik(s.theta(), data, s.batch()).unwrap();
        assert!((fresh - s.cached_score()).abs() < 1e-10);
        if let Some(g) = s.grad() {
            let fresh = model.batch_mean_grad(s.theta(), data, s.batch()).unwrap();
            assert_eq!(g, &fresh);
        }
    }
    assert!(chain.counts().accepted.iter().sum::<u64>() > 0);
}

#[test]
fn cache_stays_coherent_for_every_kernel() {
    let model = ModelSpec::gaussian_mixture(2.0, 10.0, 1.0);
    let data = model.generate_data(&[0.0, 2.0], 200, 2).unwrap();
    let theta0 = ParamVector::new(vec![0.0, 2.0]).unwrap();
    assert_cache_coherent(&model, &data, Proposal::RandomWalk(RwConfig::new(0.2).unwrap()), theta0.clone(), 2000);
    assert_cache_coherent(&model, &data, rsgld(), theta0.clone(), 2000);
    let sgld = Proposal::Sgld(RsgldConfig::new(1e-3, 1.0, 200).unwrap());
    assert_cache_coherent(&model, &data, sgld, theta0, 2000);
}

#[test]
fn reduces_to_full_batch_metropolis_hastings() {
    let model = unit();
    let data = model.generate_data(&[0.3], 50, 8).unwrap();
    let xs: Vec<f64> = data.values().to_vec();
    let spec = TemperSpec::new(50, 50, 50.0).unwrap();
    let delta = 0.2;
    let proposal = Proposal::RandomWalk(RwConfig::new(delta).unwrap());
    let mut chain = Chain::new(&model, &data, proposal, spec, ParamVector::zeros(1), 11, 0).unwrap();

    let mut rng = stream(11, 0);
    let log_post = |t: f64| xs.iter().map(|&x| ell(t, x)).sum::<f64>();
    let mut theta = 0.0;
    for _ in 0..1000 {
        let z: f64 = rng.sample(StandardNormal);
        let cand = theta + delta * z;
        let u: f64 = rng.random();
        let take = u.ln() < (log_post(cand) - log_post(theta)).min(0.0);
        if take {
            theta = cand;
        }
        let rec = chain.step().unwrap();
        assert_eq!(rec.accepted, take);
        assert_eq!(rec.uniform_draw, u);
    }
}

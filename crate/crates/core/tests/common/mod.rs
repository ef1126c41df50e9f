#![allow(dead_code)]

use pathattr::data::ForcingLevel;
use pathattr::likelihood::JointModel;
use pathattr::pathway::PathwayGraph;
use pathattr::regress::StepModel;
use pathattr::synth::oracle::BivariateChain;

pub fn level(x: f64) -> ForcingLevel {
    ForcingLevel::new(x).unwrap()
}

pub fn levels(xs: &[f64]) -> Vec<ForcingLevel> {
    xs.iter().map(|&x| level(x)).collect()
}

/// Step model with given coefficients (ordered as the graph's parent set).
pub fn hand_step(graph: &PathwayGraph, target: &str, theta: Vec<f64>, intercept: f64, sigma2: f64) -> StepModel {
    let parents = graph.parent_set(target).unwrap();
    let k = theta.len();
    assert_eq!(k, parents.parents.len());
    StepModel {
        target: target.into(),
        parents,
        theta,
        intercept,
        with_intercept: intercept != 0.0,
        sigma2,
        n_obs: 100,
        r2: 0.5,
        theta_std_errors: vec![0.0; k],
        intercept_std_error: None,
        excluded_forcings: Vec::new(),
    }
}

/// `k ~ N(theta * F, sigma2)`.
pub fn single_step_model(theta: f64, sigma2: f64) -> JointModel {
    let graph = PathwayGraph::single_step("F", "k");
    let step = hand_step(&graph, "k", vec![theta], 0.0, sigma2);
    JointModel::new(graph, vec![step], None).unwrap()
}

/// FSNT plays `y1`, TREFHT plays `y2`.
pub fn chain_model(m: &BivariateChain) -> JointModel {
    let graph = PathwayGraph::surface_cooling();
    let s1 = hand_step(&graph, "FSNT", vec![m.b1], m.a1, m.s1);
    let s2 = hand_step(&graph, "TREFHT", vec![m.b2, m.c], m.a2, m.s2);
    JointModel::new(graph, vec![s1, s2], None).unwrap()
}

pub fn single_pathway() -> PathwayGraph {
    PathwayGraph::single_step("SO2", "TREFHT")
}

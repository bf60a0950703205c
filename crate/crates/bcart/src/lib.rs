//! Bayesian CART for insurance claims.
//!
//! Trees are sampled by Metropolis–Hastings over grow/prune/change/swap moves,
//! scoring each candidate with a closed-form (possibly latent-augmented)
//! integrated likelihood per leaf.  Three model classes are supported:
//!
//! * average-severity trees ([`severity_models`]): GammaN, Gamma, lognormal, Weibull;
//! * claim-count trees ([`frequency_models`]): Poisson and three zero-inflated Poisson variants;
//! * joint `(N, S)` trees ([`joint_models`]): compound Poisson-gamma and its zero-inflated forms.
//!
//! Trees are selected by DIC over a `(γ, ρ)` sweep ([`mcmc`]) and evaluated with
//! the RSS / SE / DS / Lift suite ([`prediction_eval`]).

pub mod artifact;
pub mod cli;
pub mod data_model;
pub mod error;
pub mod frequency_models;
pub mod joint_models;
pub mod mcmc;
pub mod model;
pub mod prediction_eval;
pub mod severity_models;
pub mod simulation;
pub mod special;
pub mod tree;

pub use error::{BcartError, Result};

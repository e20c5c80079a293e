//! Energy-efficiency maximization for a 1-bit RIS-assisted multi-user MISO
//! downlink with zero-forcing precoding.
//!
//! The pipeline alternates Dinkelbach power allocation ([`power`]) with a
//! binary RIS configuration step, either maximum-gradient bit flips
//! ([`gradient`]) or a semidefinite relaxation with randomized rounding
//! ([`sdp`]). [`baselines`] holds the reference configurations and the
//! exhaustive oracles, [`ao`] the alternating loop and [`experiment`] the
//! config/CSV layer behind the `ris-ee-lab` binary.

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod gradient;
pub mod linalg;
pub mod model;
pub mod power;
pub mod sdp;

pub use ao::{run_ao, AoOptions, AoOutcome, InitialRis, Method};
pub use baselines::{all_off_ris, brute_force_ee, brute_force_g, random_ris, successive_update, OracleResult};
pub use channel::{draw_channel, iid_channel, steering_vector};
pub use error::{Error, Result};
pub use gradient::{gradient_g, objective_g, search_max_gradient, GradSearchParams, RisObjective};
pub use model::{
    effective_channel, metrics, t_coefficients, zf_precoder, ChannelRealization, EEReport, PowerAllocation, RisConfig,
    SystemConfig,
};
pub use power::{dinkelbach, inner_solution, solve_zeta, AllocProblem};
pub use sdp::{assemble, round_solution, solve_relaxation, SdpProblem, SdpSolution};

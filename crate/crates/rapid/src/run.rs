//! Algorithm selection and timed execution on the threaded runner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rapid_core::engine::{run_pipeline, EngineConfig, Pipeline, RunOutput};
use rapid_core::stage::StageObserver;
use rapid_core::{LinearModel, Pyramid};

use crate::parallel::ParallelRunner;
use crate::report::{PhaseTimer, Timed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// Single-level coarse-to-fine refinement.
    Ctftps,
    /// Every level refined with statistics recomputed from pixels.
    Multiscale,
    /// Merging, gating and carried-over means.
    Rapid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ctftps, Algorithm::Multiscale, Algorithm::Rapid];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ctftps => "ctftps",
            Algorithm::Multiscale => "multiscale",
            Algorithm::Rapid => "rapid",
        }
    }

    pub fn is_single_level(self) -> bool {
        self == Algorithm::Ctftps
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}; expected ctftps, multiscale or rapid"))
    }
}

/// Runs `algo` on `pyr`, charging phases to `timer` (plus `total`). A
/// single-level algorithm only sees the finest level.
pub fn execute(
    algo: Algorithm,
    pyr: &Pyramid,
    cfg: &EngineConfig,
    model: Option<&LinearModel>,
    runner: &mut ParallelRunner,
    timer: &mut PhaseTimer,
    obs: &mut dyn StageObserver,
) -> rapid_core::Result<RunOutput> {
    let start = Instant::now();
    let single;
    let (pyr, pipeline) = match algo {
        Algorithm::Ctftps => {
            single = Pyramid::single(pyr.finest().clone());
            (&single, Pipeline::Multiscale)
        }
        Algorithm::Multiscale => (pyr, Pipeline::Multiscale),
        Algorithm::Rapid => (pyr, Pipeline::Rapid { model }),
    };
    let out = run_pipeline(pyr, cfg, pipeline, &mut Timed { inner: runner, timer: &mut *timer }, obs);
    timer.add("total", start.elapsed());
    out
}

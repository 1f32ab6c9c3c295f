"""Rate-distortion guided exploration with randomized value functions on tabular MDPs."""

from barvf.agents import BARVFAgent, EpisodeResult, EpsilonGreedyAgent, RVFAgent, make_agent, run_episode
from barvf.envs import TabularMdp, confluence_swim, grid_env, make_env, optimal_q, river_swim
from barvf.harness import ExperimentConfig, beta_sweep, run_experiment, summarize
from barvf.posterior import EnsemblePosterior, init_posterior
from barvf.rate_distortion import BAConfig, BlahutArimoto, ChannelSolution, blahut_arimoto, trace_rd_curve

__version__ = "0.1.0"

__all__ = [
    "BAConfig",
    "BARVFAgent",
    "BlahutArimoto",
    "ChannelSolution",
    "EnsemblePosterior",
    "EpisodeResult",
    "EpsilonGreedyAgent",
    "ExperimentConfig",
    "RVFAgent",
    "TabularMdp",
    "beta_sweep",
    "blahut_arimoto",
    "confluence_swim",
    "grid_env",
    "init_posterior",
    "make_agent",
    "make_env",
    "optimal_q",
    "river_swim",
    "run_episode",
    "run_experiment",
    "summarize",
    "trace_rd_curve",
]

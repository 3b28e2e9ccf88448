"""Seeded experiment campaigns: configuration, training, evaluation, metric
persistence, and run comparison.

Every run is fully determined by its spec (controller, scenario, seed,
overrides): device positions, training, and each evaluation episode draw
from seed-derived streams, so re-running a spec reproduces the metric files
byte for byte. Evaluation episodes are independently seeded and can fan out
across worker processes; results merge by episode index.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .agents import (
    AaPolicy,
    CmaEnsemble,
    CmaPolicy,
    DqnAgent,
    EpsilonSchedule,
    LinearQAgent,
    SingleGroupAgentPolicy,
    train_aa,
    train_cma,
    train_single_group,
)
from .baseline import FsiUrcController, LeUrcController, MultiGroupLeUrcController
from .core import (
    ConfigError,
    SimParams,
    db_to_linear,
    dbm_to_mw,
    multi_group_params,
    single_group_params,
)
from .devices import DevicePopulation
from .env import EpisodeConfig, UplinkEnv, run_episode
from .fapprox import load_arrays, save_arrays
from .tabular import TabularQAgent

CONTROLLERS = ("le-urc", "fsi-urc", "tabular-q", "la-q", "dqn",
               "aa-la-q", "aa-dqn", "cma-dqn")
SCENARIOS = ("single-group", "multi-group")
_ALLOWED = {
    "single-group": {"le-urc", "fsi-urc", "tabular-q", "la-q", "dqn"},
    "multi-group": {"le-urc", "aa-la-q", "aa-dqn", "cma-dqn"},
}
_RL = {"tabular-q", "la-q", "dqn", "aa-la-q", "aa-dqn", "cma-dqn"}

# stream labels for seed-derived generators
_STREAM_POP, _STREAM_AGENT, _STREAM_TRAIN, _STREAM_EVAL = 0x9E37, 1, 2, 3

OUTPUT_ROOT_ENV = "NBIOTSIM_OUTPUT_ROOT"


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: controller, scenario, seed, and overrides."""

    controller: str
    scenario: str = "single-group"
    seed: int = 0
    desk: bool = False
    episodes: int = -1              # training episodes; -1 -> profile default
    eval_episodes: int = 200
    eval_epsilon: float = 0.0
    horizon: int = 937
    m_o: int = 4
    leurc_repe: tuple = (1, 4, 8)
    params: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.controller not in _ALLOWED[self.scenario]:
            raise ConfigError(
                f"controller {self.controller!r} is not available in the "
                f"{self.scenario} scenario"
            )
        object.__setattr__(self, "leurc_repe", tuple(self.leurc_repe))
        if self.episodes < 0:
            object.__setattr__(self, "episodes", default_training_episodes(self))
        if not self.name:
            object.__setattr__(self, "name", f"{self.controller}-s{self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["leurc_repe"] = tuple(d.get("leurc_repe", (1, 4, 8)))
        return cls(**d)


def default_training_episodes(spec: ExperimentSpec) -> int:
    if spec.controller not in _RL:
        return 0
    if spec.desk:
        return {"tabular-q": 300, "la-q": 80, "dqn": 50,
                "aa-la-q": 150, "aa-dqn": 90, "cma-dqn": 90}[spec.controller]
    return {"tabular-q": 5000, "la-q": 1000, "dqn": 500,
            "aa-la-q": 1500, "aa-dqn": 800, "cma-dqn": 800}[spec.controller]


def build_params(spec: ExperimentSpec) -> SimParams:
    if spec.scenario == "single-group":
        p = single_group_params(seed=spec.seed)
        if spec.desk:
            p = p.override(n_periodic=1000, n_bursty=500)
    else:
        p = multi_group_params(seed=spec.seed)
        if spec.desk:
            p = p.override(n_periodic=3000, n_bursty=3000)
    if spec.params:
        p = p.override(**spec.params)
    return p


def build_episode_config(spec: ExperimentSpec) -> EpisodeConfig:
    state_mode = {
        "le-urc": "last_obs", "fsi-urc": "last_obs", "tabular-q": "last_obs",
        "la-q": "obs_window", "dqn": "obs_window",
        "aa-la-q": "action_obs_window", "aa-dqn": "action_obs_window",
        "cma-dqn": "action_obs_window",
    }[spec.controller]
    return EpisodeConfig(mode=spec.scenario, horizon=spec.horizon,
                         m_o=spec.m_o, state_mode=state_mode)


def default_hyper(spec: ExperimentSpec) -> dict:
    h = {
        "gamma": 0.5,
        "lam": 0.01,              # tabular and linear step size
        "lr": 1e-4,               # RMSProp rate for the DQN family
        "batch_size": 32,
        "sync_every": 1000,
        "capacity": 10_000,
        "double": True,
        "degree": 2,
        "eps_start": 1.0,
        "eps_end": 0.1,
        "anneal_frac": 0.6,
    }
    if spec.controller in ("dqn", "cma-dqn"):
        h["hidden"] = (128, 128, 128)
    elif spec.controller == "aa-dqn":
        h["hidden"] = (256, 256, 256) if spec.desk else (2048, 2048, 2048)
    h.update(spec.hyper)
    if "hidden" in h:
        h["hidden"] = tuple(h["hidden"])
    return h


def build_agent(spec: ExperimentSpec, env: UplinkEnv):
    h = default_hyper(spec)
    rng = np.random.default_rng([spec.seed, _STREAM_AGENT])
    c = spec.controller
    if c == "tabular-q":
        return TabularQAgent(n_actions=4, lam=h["lam"], gamma=h["gamma"])
    if c == "la-q":
        return LinearQAgent(env.state_dim, 4, degree=h["degree"],
                            lam=h["lam"], gamma=h["gamma"])
    if c == "dqn":
        return DqnAgent(env.state_dim, 4, hidden=h["hidden"], gamma=h["gamma"],
                        lr=h["lr"], batch_size=h["batch_size"],
                        sync_every=h["sync_every"], capacity=h["capacity"],
                        double=h["double"], rng=rng)
    if c == "aa-la-q":
        return LinearQAgent(env.state_dim, 512, degree=h["degree"],
                            lam=h["lam"], gamma=h["gamma"])
    if c == "aa-dqn":
        return DqnAgent(env.state_dim, 512, hidden=h["hidden"], gamma=h["gamma"],
                        lr=h["lr"], batch_size=h["batch_size"],
                        sync_every=h["sync_every"], capacity=h["capacity"],
                        double=h["double"], rng=rng)
    if c == "cma-dqn":
        return CmaEnsemble(env.state_dim, hidden=h["hidden"], gamma=h["gamma"],
                           lr=h["lr"], batch_size=h["batch_size"],
                           sync_every=h["sync_every"], capacity=h["capacity"],
                           double=h["double"], rng=rng)
    return None


def build_policy(spec: ExperimentSpec, agent, params: SimParams,
                 episode: EpisodeConfig):
    c = spec.controller
    if c == "le-urc":
        if spec.scenario == "single-group":
            return LeUrcController(params, episode.fixed_n_rach, episode.fixed_n_repe)
        return MultiGroupLeUrcController(params, n_repe_fixed=spec.leurc_repe)
    if c == "fsi-urc":
        return FsiUrcController(params, episode.fixed_n_rach, episode.fixed_n_repe)
    if c in ("tabular-q", "la-q", "dqn"):
        return SingleGroupAgentPolicy(agent, episode, spec.eval_epsilon)
    if c in ("aa-la-q", "aa-dqn"):
        return AaPolicy(agent, params, spec.eval_epsilon)
    if c == "cma-dqn":
        return CmaPolicy(agent, params, spec.eval_epsilon)
    raise ConfigError(f"unknown controller {c!r}")


# -------------------------------------------------------------------- metrics
def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


EVAL_COLUMNS = (
    ["seed", "episode", "tti", "reward", "v_su", "v_drop", "arrivals"]
    + [f"{name}_{i}" for i in range(3)
       for name in ("v_su", "v_un", "v_cp", "v_sp", "v_ip",
                    "n_rach", "n_repe", "f_prea")]
)


def episode_rows(seed: int, episode: int, res) -> list:
    rows = []
    g = res.v_su.shape[1]
    for t in range(res.horizon):
        row = [seed, episode, t + 1, res.reward[t],
               int(res.v_su[t].sum()), int(res.v_drop[t]), int(res.arrivals[t])]
        for i in range(3):
            if i < g:
                row += [res.v_su[t, i], res.v_un[t, i], res.v_cp[t, i],
                        res.v_sp[t, i], res.v_ip[t, i], res.n_rach[t, i],
                        res.n_repe[t, i], res.f_prea[t, i]]
            else:
                row += [0] * 8
        rows.append(row)
    return rows


def write_csv(path: Path, columns, rows, spec_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# spec_sha256={spec_hash}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    meta = {"columns": list(columns), "rows": len(rows), "spec_sha256": spec_hash}
    with open(path.with_suffix(path.suffix + ".meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)


def read_csv(path: Path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{path} is missing the spec header")
        columns = fh.readline().strip().split(",")
        data = [line.strip().split(",") for line in fh if line.strip()]
    arr = np.array(data, dtype=float)
    return columns, arr


def bootstrap_ci(values, n_boot: int = 2000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return (float("nan"), float("nan"))
    rng = np.random.default_rng([seed, 0xB007])
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(means, lo)), float(np.quantile(means, 1.0 - lo)))


def bootstrap_diff_ci(a, b, n_boot: int = 2000, seed: int = 0, level: float = 0.95):
    """Bootstrap interval for mean(a) - mean(b) with independent resampling."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng([seed, 0xD1FF])
    da = a[rng.integers(0, a.size, size=(n_boot, a.size))].mean(axis=1)
    db = b[rng.integers(0, b.size, size=(n_boot, b.size))].mean(axis=1)
    diff = da - db
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(diff, lo)), float(np.quantile(diff, 1.0 - lo)))


# ------------------------------------------------------------------ execution
def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _train_checkpoint_path(out: Path, k: int | None = None) -> Path:
    name = "agent.bin" if k is None else f"cma_agent_{k}.bin"
    return out / "checkpoints" / name


def save_checkpoint(out: Path, spec: ExperimentSpec, agent, state: dict) -> None:
    ckpt = out / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    if isinstance(agent, CmaEnsemble):
        for k, sub in enumerate(agent.agents):
            save_arrays(_train_checkpoint_path(out, k), sub.checkpoint_arrays())
    else:
        save_arrays(_train_checkpoint_path(out), agent.checkpoint_arrays())
    with open(ckpt / "trainer_state.json", "w") as fh:
        json.dump(state, fh, sort_keys=True, indent=1, default=int)


def load_checkpoint(out: Path, spec: ExperimentSpec, agent) -> dict:
    ckpt = out / "checkpoints"
    if isinstance(agent, CmaEnsemble):
        for k, sub in enumerate(agent.agents):
            sub.restore_arrays(load_arrays(_train_checkpoint_path(out, k)))
    else:
        agent.restore_arrays(load_arrays(_train_checkpoint_path(out)))
    with open(ckpt / "trainer_state.json") as fh:
        return json.load(fh)


def _train(spec: ExperimentSpec, params, episode, population, out: Path,
           resume: bool, log) -> tuple:
    agent = build_agent(spec, UplinkEnv(params, episode, population))
    if agent is None or spec.episodes == 0:
        return agent, None
    state_path = out / "checkpoints" / "trainer_state.json"
    start_ep = 0
    if resume and state_path.exists():
        state = load_checkpoint(out, spec, agent)
        start_ep = int(state.get("episodes_done", 0))
        log(f"resumed {spec.controller} checkpoint after {start_ep} episodes")
        if start_ep >= spec.episodes:
            return agent, None
    env = UplinkEnv(params, episode, population)
    h = default_hyper(spec)
    total_steps = spec.episodes * spec.horizon
    schedule = EpsilonSchedule(h["eps_start"], h["eps_end"],
                               max(int(h["anneal_frac"] * total_steps), 1))
    agent_rng = np.random.default_rng([spec.seed, _STREAM_AGENT, 7])

    def ep_rng(local_ep):
        return np.random.default_rng([spec.seed, _STREAM_TRAIN, start_ep + local_ep])

    trainer = {
        "tabular-q": train_single_group, "la-q": train_single_group,
        "dqn": train_single_group, "aa-la-q": train_aa, "aa-dqn": train_aa,
        "cma-dqn": train_cma,
    }[spec.controller]
    # offset the epsilon schedule when resuming
    if start_ep:
        schedule = EpsilonSchedule(
            schedule.value(start_ep * spec.horizon), h["eps_end"],
            max(int(h["anneal_frac"] * total_steps) - start_ep * spec.horizon, 1))
    curve = trainer(env, agent, spec.episodes - start_ep, schedule, agent_rng,
                    episode_rngs=ep_rng)
    save_checkpoint(out, spec, agent, {"episodes_done": spec.episodes,
                                       "controller": spec.controller})
    return agent, curve


def _eval_one(args):
    spec_dict, episode_idx, pop_payload = args
    spec = ExperimentSpec.from_dict(spec_dict)
    params = build_params(spec)
    episode = build_episode_config(spec)
    population = pop_payload
    agent = build_agent(spec, UplinkEnv(params, episode, population))
    out_dir = Path(spec_dict["_run_dir"])
    if agent is not None and spec.episodes > 0:
        load_checkpoint(out_dir, spec, agent)
    policy = build_policy(spec, agent, params, episode)
    env = UplinkEnv(params, episode, population)
    rng = np.random.default_rng([spec.seed, _STREAM_EVAL, episode_idx])
    return episode_idx, run_episode(env, policy, rng=rng)


def evaluate(spec: ExperimentSpec, agent, params, episode, population,
             workers: int = 1, run_dir: Path | None = None):
    """Run the evaluation episodes (optionally across worker processes) and
    return results ordered by episode index."""
    results = [None] * spec.eval_episodes
    if workers > 1 and run_dir is not None:
        payload = spec.to_dict()
        payload["_run_dir"] = str(run_dir)
        ctx = get_context("fork")
        with ctx.Pool(workers) as pool:
            for idx, res in pool.imap_unordered(
                    _eval_one,
                    [(payload, ep, population) for ep in range(spec.eval_episodes)],
                    chunksize=4):
                results[idx] = res
        return results
    policy = build_policy(spec, agent, params, episode)
    for ep in range(spec.eval_episodes):
        env = UplinkEnv(params, episode, population)
        rng = np.random.default_rng([spec.seed, _STREAM_EVAL, ep])
        results[ep] = run_episode(env, policy, rng=rng)
    return results


def run(spec: ExperimentSpec, out_dir=None, workers: int = 1,
        resume: bool = False, log=print) -> Path:
    """Execute one spec end to end; returns the artifact directory."""
    out = Path(out_dir) if out_dir else output_root() / spec.name
    out.mkdir(parents=True, exist_ok=True)
    spec_hash = spec.sha256()
    with open(out / "spec.json", "w") as fh:
        json.dump({"hash": spec_hash, "spec": spec.to_dict()}, fh,
                  sort_keys=True, indent=1)

    params = build_params(spec)
    episode = build_episode_config(spec)
    population = DevicePopulation(params, spec.scenario,
                                  np.random.default_rng([spec.seed, _STREAM_POP]))

    agent, curve = _train(spec, params, episode, population, out, resume, log)
    if curve is not None:
        rows = [[ep, r, v, d] for ep, (r, v, d) in enumerate(
            zip(curve.mean_reward, curve.mean_v_su, curve.total_drops))]
        write_csv(out / "train_metrics.csv",
                  ["episode", "mean_reward", "mean_v_su", "total_drops"],
                  rows, spec_hash)
    elif agent is not None and spec.episodes > 0 and not resume:
        raise ConfigError("trained controller without a training curve")

    results = evaluate(spec, agent, params, episode, population,
                       workers=workers, run_dir=out)
    rows = []
    for ep, res in enumerate(results):
        rows.extend(episode_rows(spec.seed, ep, res))
    write_csv(out / "eval_metrics.csv", EVAL_COLUMNS, rows, spec_hash)

    per_ep = np.array([r.mean_v_su() for r in results])
    per_ep_drop = np.array([r.total_drops() for r in results], dtype=float)
    h = results[0].horizon
    g = results[0].v_su.shape[1]
    v_su_curve = np.mean([r.v_su.sum(axis=1) for r in results], axis=0)
    arrivals_curve = np.mean([r.arrivals for r in results], axis=0)
    per_group = np.mean([r.v_su.mean(axis=0) for r in results], axis=0)
    repe_curve = np.mean([r.n_repe for r in results], axis=0)
    rao_curve = np.mean([r.n_rach * r.f_prea for r in results], axis=0)
    summary = {
        "spec_sha256": spec_hash,
        "spec": spec.to_dict(),
        "eval_episodes": spec.eval_episodes,
        "mean_v_su": float(per_ep.mean()),
        "ci95_v_su": bootstrap_ci(per_ep, seed=spec.seed),
        "mean_v_drop": float(per_ep_drop.mean()),
        "per_episode_mean_v_su": [float(x) for x in per_ep],
        "per_group_mean_v_su": [float(x) for x in per_group],
        "per_tti_mean_v_su": [float(x) for x in v_su_curve],
        "per_tti_mean_arrivals": [float(x) for x in arrivals_curve],
        "per_tti_mean_n_repe": [[float(x) for x in repe_curve[:, i]] for i in range(g)],
        "per_tti_mean_rao": [[float(x) for x in rao_curve[:, i]] for i in range(g)],
        "horizon": h,
    }
    if curve is not None:
        summary["learning_curve_mean_reward"] = curve.mean_reward
        summary["learning_curve_mean_v_su"] = curve.mean_v_su
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
    log(f"run {spec.name}: mean v_su {summary['mean_v_su']:.4f} -> {out}")
    return out


def load_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise ConfigError(f"{run_dir} has no summary.json (incomplete run?)")
    with open(path) as fh:
        return json.load(fh)


def compare(run_dirs, seed: int = 0):
    """Rank completed runs by mean served devices with bootstrap CIs.

    Refuses to compare runs from different scenarios."""
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two completed runs")
    summaries = [load_summary(d) for d in run_dirs]
    scenarios = {s["spec"]["scenario"] for s in summaries}
    if len(scenarios) != 1:
        raise ConfigError(f"cannot compare runs across scenarios: {sorted(scenarios)}")
    rows = []
    for d, s in zip(run_dirs, summaries):
        per_ep = np.asarray(s["per_episode_mean_v_su"])
        lo, hi = bootstrap_ci(per_ep, seed=seed)
        rows.append({
            "run": str(d),
            "name": s["spec"]["name"],
            "controller": s["spec"]["controller"],
            "mean_v_su": float(per_ep.mean()),
            "ci_lo": lo,
            "ci_hi": hi,
            "episodes": int(per_ep.size),
        })
    rows.sort(key=lambda r: -r["mean_v_su"])
    return rows


def format_compare_table(rows) -> str:
    lines = [f"{'controller':<12} {'name':<24} {'mean v_su':>10} {'95% CI':>23} {'eps':>5}"]
    for r in rows:
        ci = f"[{r['ci_lo']:.4f}, {r['ci_hi']:.4f}]"
        lines.append(f"{r['controller']:<12} {r['name']:<24} "
                     f"{r['mean_v_su']:>10.4f} {ci:>23} {r['episodes']:>5}")
    return "\n".join(lines)


def export_plots(run_dir, out_dir=None) -> Path:
    """Dump tidy per-figure CSVs (traffic/served curves, per-group service,
    repetition and RAO trajectories, learning curve) from a finished run."""
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir / "plots"
    out.mkdir(parents=True, exist_ok=True)
    s = load_summary(run_dir)
    spec_hash = s["spec_sha256"]
    h = s["horizon"]
    ttis = range(1, h + 1)
    write_csv(out / "load_and_served.csv", ["tti", "mean_arrivals", "mean_v_su"],
              [[t, s["per_tti_mean_arrivals"][t - 1], s["per_tti_mean_v_su"][t - 1]]
               for t in ttis], spec_hash)
    groups = range(len(s["per_group_mean_v_su"]))
    write_csv(out / "per_group_served.csv",
              ["group", "mean_v_su"],
              [[i, s["per_group_mean_v_su"][i]] for i in groups], spec_hash)
    write_csv(out / "repetitions_and_raos.csv",
              ["tti"] + [f"n_repe_{i}" for i in groups] + [f"rao_{i}" for i in groups],
              [[t] + [s["per_tti_mean_n_repe"][i][t - 1] for i in groups]
               + [s["per_tti_mean_rao"][i][t - 1] for i in groups]
               for t in ttis], spec_hash)
    if "learning_curve_mean_reward" in s:
        write_csv(out / "learning_curve.csv",
                  ["episode", "mean_reward", "mean_v_su"],
                  [[e, r, v] for e, (r, v) in enumerate(
                      zip(s["learning_curve_mean_reward"],
                          s["learning_curve_mean_v_su"]))], spec_hash)
    return out


# ---------------------------------------------------------------- INI parsing
_PARAM_DB_KEYS = {
    "noise_dbm": ("noise_mw", dbm_to_mw),
    "bcast_dbm": ("bcast_mw", dbm_to_mw),
    "prach_max_dbm": ("prach_max_mw", dbm_to_mw),
    "rho_db": ("inv_ctrl_max_pl", db_to_linear),
    "snr_threshold_db": ("snr_threshold", db_to_linear),
    "rsrp_thr1_dbm": ("rsrp_thr1_mw", dbm_to_mw),
    "rsrp_thr2_dbm": ("rsrp_thr2_mw", dbm_to_mw),
}
_PARAM_FLOAT_KEYS = ("eta", "t_tti_ms", "t_periodic_ms", "t_bursty_ms",
                     "beta_alpha", "beta_beta", "cell_radius_m")
_PARAM_INT_KEYS = ("gamma_rrc", "gamma_pmax", "gamma_pce", "b_rach", "b_data",
                   "r_uplink", "n_periodic", "n_bursty", "c_su", "backlog_cap")


def load_spec_ini(path) -> ExperimentSpec:
    """Parse a sectioned key=value config file into an ExperimentSpec."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    cp.read(path)
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    try:
        spec_kw = {
            "controller": exp.get("controller", "le-urc"),
            "scenario": exp.get("scenario", "single-group"),
            "seed": int(exp.get("seed", 0)),
            "desk": exp.get("desk", "false").strip().lower() in ("1", "true", "yes"),
            "episodes": int(exp.get("episodes", -1)),
            "eval_episodes": int(exp.get("eval_episodes", 200)),
            "eval_epsilon": float(exp.get("eval_epsilon", 0.0)),
            "horizon": int(exp.get("horizon", 937)),
            "m_o": int(exp.get("m_o", 4)),
            "name": exp.get("name", ""),
        }
        if "leurc_repe" in exp:
            spec_kw["leurc_repe"] = tuple(
                int(v) for v in exp["leurc_repe"].replace(",", " ").split())
        params: dict = {}
        if cp.has_section("simulation"):
            for key, raw in cp["simulation"].items():
                if key in _PARAM_DB_KEYS:
                    name, conv = _PARAM_DB_KEYS[key]
                    params[name] = conv(float(raw))
                elif key in _PARAM_FLOAT_KEYS:
                    params[key] = float(raw)
                elif key in _PARAM_INT_KEYS:
                    params[key] = int(raw)
                elif key == "intra_tti_retry":
                    params[key] = raw.strip().lower() in ("1", "true", "yes")
                else:
                    raise ConfigError(f"unknown simulation key {key!r}")
        hyper: dict = {}
        if cp.has_section("hyper"):
            for key, raw in cp["hyper"].items():
                if key == "hidden":
                    hyper[key] = tuple(int(v) for v in raw.replace(",", " ").split())
                elif key in ("batch_size", "sync_every", "capacity", "degree"):
                    hyper[key] = int(raw)
                elif key == "double":
                    hyper[key] = raw.strip().lower() in ("1", "true", "yes")
                else:
                    hyper[key] = float(raw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return ExperimentSpec(params=params, hyper=hyper, **spec_kw)

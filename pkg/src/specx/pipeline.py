"""End-to-end coexistence runs and Monte-Carlo sweeps.

A scenario couples a wideband sensing receiver, a set of communication
transmissions, a radio environment map, and a multiband radar. run_specx
executes the closed loop: sense the comm support, select radar bands away
from it, recover targets from the radar's sparse coefficients, then re-sense
with the radar support known, iterating while the detected comm support
keeps changing. sweep() runs Monte-Carlo experiments along one axis (SNR,
band placement, or channel count) with per-trial derived seeds, so reports
are byte-reproducible for a fixed master seed regardless of worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .bands import RemGrid, select_bands
from .freqs import FrequencySet, GridSpec, SliceSupport
from .mwc import SensingMatrix, build_sensing_matrix, gen_mixing_sequences, total_rate, xample
from .radar import (
    DetectionList,
    KappaSet,
    MinRequirements,
    delay_to_range_m,
    doppler_focus,
    focused_noise_var,
    focused_omp,
    glrt_threshold,
    hit_or_miss,
    make_kappa,
    min_requirements,
    partial_fourier,
)
from .report import RunReport
from .rng import derive_rng
from .sensing import (
    build_frame,
    omp_pks,
    radar_slice_support,
    recover_slices,
    sense_spectrum,
    somp,
    support_to_freqs,
)
from .signals import (
    CommTransmissionSpec,
    PulseTrainSpec,
    RadarWaveformSpec,
    TargetScene,
    design_radar_waveform,
    gen_comm_slices,
    radar_fourier_coeffs,
    radar_slices,
)

__all__ = [
    "ConfigError",
    "InfeasibleError",
    "GridConfig",
    "CommConfig",
    "RemConfig",
    "RadarConfig",
    "SceneConfig",
    "SweepConfig",
    "LoopConfig",
    "ScenarioConfig",
    "load_config",
    "available_presets",
    "band_layout",
    "run_specx",
    "run_sense",
    "run_select_bands",
    "run_radar",
    "sweep",
]

SWEEP_AXES = ("snr", "band_placement", "channels")
_LAYOUT_NAMES = ("separated", "adjacent", "wideband")


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class InfeasibleError(RuntimeError):
    """The configured scene cannot be recovered even noiselessly."""


def _child_seed(master: int, *path) -> int:
    return int(derive_rng(master, *path).integers(0, 2**63 - 1))


def _build(cls, data: Any, where: str):
    """Construct a config dataclass from a mapping with strict key checking."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    missing = [
        f.name
        for f in fields(cls)
        if f.default is MISSING and f.default_factory is MISSING and f.name not in data
    ]
    if missing:
        raise ConfigError(f"{where}: missing required keys {missing}")
    try:
        return cls(**dict(data))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class GridConfig:
    """Wideband receiver front end: spectral grid plus channel bank size."""

    f_nyq: float
    f_p: float
    f_s: float
    n_grid: int
    n_channels: int
    n_chips: int

    def to_grid(self) -> GridSpec:
        return GridSpec(
            f_nyq=self.f_nyq, f_p=self.f_p, f_s=self.f_s, n_grid=self.n_grid, n_slices=0
        )


@dataclass(frozen=True)
class CommConfig:
    """Transmissions on the air plus the receiver's working assumptions.

    The greedy support recovery always spends its whole slice budget, so
    under ambient noise it returns spurious low-energy slices on top of the
    true ones. prune_db sets the pipeline's model-order selection: recovered
    slices whose energy falls more than prune_db below the strongest comm
    slice are discarded before anything downstream sees the support. None
    disables pruning (adequate only for noise-free scenarios).
    """

    transmissions: tuple[CommTransmissionSpec, ...]
    noise_psd: float = 0.0
    n_sig: int = 0
    prune_db: float | None = None
    refine_db: float | None = None
    phase2_transmissions: tuple[CommTransmissionSpec, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "transmissions", tuple(self.transmissions))
        if self.phase2_transmissions is not None:
            object.__setattr__(
                self, "phase2_transmissions", tuple(self.phase2_transmissions)
            )

    @property
    def n_sig_effective(self) -> int:
        counts = [len(self.transmissions), self.n_sig]
        if self.phase2_transmissions is not None:
            counts.append(len(self.phase2_transmissions))
        return max(1, *counts)


@dataclass(frozen=True)
class RemConfig:
    energies: tuple[float, ...]
    b_y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))

    def to_rem(self) -> RemGrid:
        return RemGrid(energies=np.asarray(self.energies), b_y=self.b_y)


@dataclass(frozen=True)
class RadarConfig:
    carrier: float
    b_h: float
    n_bands: int
    pri: float
    n_pulses: int
    p_t: float = 1.0
    noise_var: float = 0.0
    p_fa: float = 0.01
    glrt_model: str = "central"
    max_detections: int = 0

    @property
    def n_delay_bins(self) -> int:
        return int(round(self.pri * self.b_h))

    def train(self) -> PulseTrainSpec:
        return PulseTrainSpec(pri=self.pri, n_pulses=self.n_pulses)


@dataclass(frozen=True)
class SceneConfig:
    n_targets: int = 0
    amplitude: float = 1.0


@dataclass(frozen=True)
class SweepConfig:
    """Monte-Carlo sweep settings.

    snr_db drives the sensing sweep; the radar band-placement sweep uses
    band_snr_db when given (radar detection saturates far below sensing
    SNRs thanks to the pulse-integration gain), falling back to snr_db.
    """

    snr_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    band_snr_db: tuple[float, ...] = ()
    band_layouts: tuple[str, ...] = _LAYOUT_NAMES
    channel_counts: tuple[int, ...] = ()
    channels_snr_db: float = 10.0
    occupancy: float = 0.2
    n_trials: int = 1000
    workers: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(
            self, "band_snr_db", tuple(float(s) for s in self.band_snr_db)
        )
        object.__setattr__(self, "band_layouts", tuple(self.band_layouts))
        object.__setattr__(
            self, "channel_counts", tuple(int(c) for c in self.channel_counts)
        )


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = 5


@dataclass(frozen=True)
class ScenarioConfig:
    run_id: str
    seed: int
    grid: GridConfig
    comm: CommConfig
    rem: RemConfig
    radar: RadarConfig
    scene: SceneConfig = SceneConfig()
    sweep: SweepConfig = SweepConfig()
    loop: LoopConfig = LoopConfig()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("scenario: expected a JSON object at top level")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"scenario: unknown keys {unknown}")
        for key in ("run_id", "seed", "grid", "comm", "rem", "radar"):
            if key not in data:
                raise ConfigError(f"scenario: missing required key '{key}'")

        comm_data = dict(data["comm"]) if isinstance(data["comm"], Mapping) else data["comm"]
        if isinstance(comm_data, Mapping):
            for key in ("transmissions", "phase2_transmissions"):
                lst = comm_data.get(key)
                if lst is not None:
                    if not isinstance(lst, Sequence) or isinstance(lst, str):
                        raise ConfigError(f"comm.{key}: expected a list")
                    comm_data[key] = tuple(
                        _build(CommTransmissionSpec, t, f"comm.{key}[{i}]")
                        for i, t in enumerate(lst)
                    )
        cfg = cls(
            run_id=str(data["run_id"]),
            seed=int(data["seed"]),
            grid=_build(GridConfig, data["grid"], "grid"),
            comm=_build(CommConfig, comm_data, "comm"),
            rem=_build(RemConfig, data["rem"], "rem"),
            radar=_build(RadarConfig, data["radar"], "radar"),
            scene=_build(SceneConfig, data.get("scene", {}), "scene"),
            sweep=_build(SweepConfig, data.get("sweep", {}), "sweep"),
            loop=_build(LoopConfig, data.get("loop", {}), "loop"),
        )
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> "ScenarioConfig":
        if not self.run_id or "/" in self.run_id:
            raise ConfigError("run_id must be a non-empty path-free name")
        try:
            grid = self.grid.to_grid()
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        if self.grid.n_channels < 1:
            raise ConfigError("grid.n_channels must be >= 1")
        if self.grid.n_chips < grid.n_slices:
            raise ConfigError(
                f"grid.n_chips ({self.grid.n_chips}) must be >= the slice count "
                f"({grid.n_slices})"
            )
        half_nyq = self.grid.f_nyq / 2.0
        for phase, specs in (
            (1, self.comm.transmissions),
            (2, self.comm.phase2_transmissions or ()),
        ):
            for i, t in enumerate(specs):
                if abs(t.carrier) + t.bandwidth / 2.0 > half_nyq:
                    raise ConfigError(
                        f"comm transmission {i} (phase {phase}) exceeds the Nyquist range"
                    )
                if t.bandwidth > self.grid.f_p:
                    raise ConfigError(
                        f"comm transmission {i} (phase {phase}) is wider than one slice"
                    )
        r = self.radar
        if r.carrier - r.b_h / 2.0 < 0 or r.carrier + r.b_h / 2.0 > half_nyq:
            raise ConfigError("radar band must lie within (0, f_nyq/2)")
        n_bins = r.n_delay_bins
        if abs(r.pri * r.b_h - n_bins) > 1e-6 * max(1, n_bins) or n_bins < 2:
            raise ConfigError("pri * b_h must be an integer number of delay bins >= 2")
        if n_bins % 2:
            raise ConfigError("pri * b_h must be even")
        if r.n_bands < 1:
            raise ConfigError("radar.n_bands must be >= 1")
        if r.n_pulses < 1:
            raise ConfigError("radar.n_pulses must be >= 1")
        if not 0.0 < r.p_fa < 1.0:
            raise ConfigError("radar.p_fa must be in (0, 1)")
        if r.glrt_model not in ("central", "noncentral"):
            raise ConfigError("radar.glrt_model must be 'central' or 'noncentral'")
        if r.noise_var < 0 or r.p_t <= 0:
            raise ConfigError("radar.noise_var must be >= 0 and p_t > 0")
        rem = self.rem
        if len(rem.energies) < r.n_bands:
            raise ConfigError("rem must have at least n_bands entries")
        if abs(len(rem.energies) * rem.b_y - r.b_h) > 1e-6 * r.b_h:
            raise ConfigError("rem width (q * b_y) must equal the radar bandwidth b_h")
        coeff_bin = r.b_h / n_bins
        ratio = rem.b_y / coeff_bin
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
            raise ConfigError(
                "rem.b_y must be an integer multiple of the radar coefficient bin "
                f"b_h / (pri * b_h) = {coeff_bin:g} Hz, got {rem.b_y:g} Hz; otherwise "
                "selected band edges cut through coefficient bins"
            )
        if self.scene.n_targets < 0:
            raise ConfigError("scene.n_targets must be >= 0")
        if self.scene.n_targets > min(n_bins, r.n_pulses):
            raise ConfigError("scene.n_targets exceeds the delay or Doppler grid")
        s = self.sweep
        if not 0.0 < s.occupancy <= 1.0:
            raise ConfigError("sweep.occupancy must be in (0, 1]")
        bad = sorted(set(s.band_layouts) - set(_LAYOUT_NAMES))
        if bad:
            raise ConfigError(f"sweep.band_layouts: unknown layouts {bad}")
        if s.n_trials < 1:
            raise ConfigError("sweep.n_trials must be >= 1")
        if s.workers < 0:
            raise ConfigError("sweep.workers must be >= 0")
        if self.loop.max_iterations < 1:
            raise ConfigError("loop.max_iterations must be >= 1")
        return self

    def feasibility(self) -> MinRequirements:
        """Worst-case sample-count check: each selected band spans at least
        one REM band, so b_y is the guaranteed per-band width."""
        req = min_requirements(
            self.scene.n_targets,
            self.radar.n_delay_bins,
            self.radar.b_h,
            (self.rem.b_y,) * self.radar.n_bands,
        )
        feasible = req.feasible and self.radar.n_pulses >= req.p_min
        return replace(req, feasible=feasible)


def available_presets() -> list[str]:
    root = resources.files("specx") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source: str | Path) -> ScenarioConfig:
    """Load a scenario from a JSON file path or a named built-in preset."""
    path = Path(source)
    if path.exists():
        return ScenarioConfig.from_json(path.read_text(encoding="utf-8"))
    name = str(source).replace("-", "_")
    candidate = resources.files("specx") / "presets" / f"{name}.json"
    if candidate.is_file():
        return ScenarioConfig.from_json(candidate.read_text(encoding="utf-8"))
    raise ConfigError(
        f"'{source}' is neither a file nor a preset (presets: {', '.join(available_presets())})"
    )


# ---------------------------------------------------------------------------
# shared building blocks


def _flat_base(n_bins: int) -> np.ndarray:
    return np.ones(n_bins)


def _draw_scene(cfg: ScenarioConfig, rng: np.random.Generator) -> TargetScene:
    l = cfg.scene.n_targets
    n_bins = cfg.radar.n_delay_bins
    train = cfg.radar.train()
    delay_bins = rng.choice(n_bins, size=l, replace=False)
    dopp_bins = rng.choice(train.n_pulses, size=l, replace=False)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=l)
    return TargetScene(
        delays=delay_bins * train.pri / n_bins,
        dopplers=train.doppler_grid()[dopp_bins],
        amplitudes=cfg.scene.amplitude * np.exp(1j * phases),
    )


def band_layout(
    name: str, b_h: float, n_bands: int, occupancy: float, n_bins: int
) -> FrequencySet:
    """Scripted transmit-band layouts at matched total occupancy.

    separated spreads n_bands equal blocks across the band with irregular
    spacing (equal spacing would put coherent grating lobes in the delay
    profile at the inverse of the band period); adjacent packs the same
    blocks back to back at the center; wideband uses all of b_h. Blocks are
    aligned to the n_bins coefficient grid.
    """
    if name == "wideband":
        return FrequencySet([(-b_h / 2.0, b_h / 2.0)])
    if name not in _LAYOUT_NAMES:
        raise ValueError(f"unknown layout '{name}'")
    delta = b_h / n_bins
    per = max(1, int(round(occupancy * n_bins)) // n_bands)
    if per * n_bands > n_bins:
        raise ValueError("occupancy too high for this bin count")
    if name == "adjacent":
        start = n_bins // 2 - (per * n_bands) // 2
        lo = (start - n_bins // 2) * delta
        return FrequencySet([(lo, lo + per * n_bands * delta)])
    intervals = []
    for j in range(n_bands):
        # deterministic aperiodic jitter, at most 0.35 of a segment
        center = (j + 0.5 + 0.35 * math.sin(2.4 * j + 1.0)) / n_bands
        start = int(round(center * n_bins - per / 2.0))
        start = min(max(start, 0), n_bins - per)
        lo = (start - n_bins // 2) * delta
        intervals.append((lo, lo + per * delta))
    out = FrequencySet(intervals)
    if len(out) != n_bands:
        raise ValueError("separated layout blocks overlap; lower the occupancy")
    return out


def _detections_payload(dets: DetectionList) -> list[list[float | None]]:
    rows = []
    for d in dets:
        stat = float(d.statistic) if math.isfinite(d.statistic) else None
        rows.append(
            [float(d.delay), float(d.doppler), float(d.amplitude.real),
             float(d.amplitude.imag), stat]
        )
    return rows


def _rmse_range_m(dets: DetectionList, scene: TargetScene, pri: float) -> float | None:
    """Per-target nearest-detection delay error, as range RMSE in meters.

    Targets with no detection anywhere count at the worst wrapped distance
    pri/2 rather than being dropped.
    """
    if len(scene) == 0:
        return None
    if len(dets) == 0:
        errs = np.full(len(scene), pri / 2.0)
    else:
        d = np.abs(dets.delays()[:, None] - scene.delays[None, :]) % pri
        d = np.minimum(d, pri - d)
        errs = d.min(axis=0)
    return float(delay_to_range_m(math.sqrt(float(np.mean(errs**2)))))


def _radar_run(
    cfg: ScenarioConfig,
    f_r: FrequencySet,
    scene: TargetScene,
    noise_var: float,
    seed: int,
) -> dict[str, Any]:
    """One radar transmit/receive/recover pass over baseband bands f_r."""
    r = cfg.radar
    n_bins = r.n_delay_bins
    train = r.train()
    waveform = design_radar_waveform(_flat_base(n_bins), r.b_h, f_r, r.p_t)
    kappa = make_kappa(f_r, r.b_h, n_bins)
    coeffs = radar_fourier_coeffs(scene, waveform, train, kappa, noise_var, seed)
    focused = doppler_focus(coeffs, waveform, kappa, train)
    f_kappa = partial_fourier(kappa)
    max_iter = r.max_detections or max(8, 2 * cfg.scene.n_targets)
    if noise_var > 0:
        fvar = focused_noise_var(noise_var, waveform, kappa, train)
        rho = r.p_t / (noise_var * f_r.measure())
        gamma = glrt_threshold(r.p_fa, n_bins * train.n_pulses, rho=rho, model=r.glrt_model)
    else:
        fvar = 0.0
        gamma = 0.0
    dets = focused_omp(focused, f_kappa, gamma, fvar, max_iter)
    hit_rate, flags = hit_or_miss(dets, scene, r.b_h, train)
    return {
        "hit_rate": hit_rate,
        "hit_flags": [bool(f) for f in flags],
        "n_detections": len(dets),
        "truncated": dets.truncated,
        "detections": _detections_payload(dets),
        "rmse_range_m": _rmse_range_m(dets, scene, r.pri),
        "kappa_size": kappa.k,
        "occupancy_ratio": f_r.measure() / r.b_h,
        "gamma": gamma,
        "waveform": waveform,
    }


def _require_feasible(cfg: ScenarioConfig) -> MinRequirements:
    req = cfg.feasibility()
    if not req.feasible:
        raise InfeasibleError(
            f"{cfg.scene.n_targets} targets need K >= {req.k_min} coefficients and "
            f"P >= {req.p_min} pulses; the configuration guarantees only "
            f"{req.b_tot_bins} coefficient bins and {cfg.radar.n_pulses} pulses"
        )
    return req


def _base_meta(cfg: ScenarioConfig, grid: GridSpec) -> dict[str, Any]:
    rate = total_rate(cfg.grid.n_channels, cfg.grid.f_s, grid)
    req = cfg.feasibility()
    return {
        "seed": cfg.seed,
        "f_nyq_hz": grid.f_nyq,
        "f_p_hz": grid.f_p,
        "f_s_hz": grid.f_s,
        "n_slices": grid.n_slices,
        "n_grid": grid.n_grid,
        "n_channels": cfg.grid.n_channels,
        "f_total_hz": rate.f_total,
        "rate_ratio": rate.channel_ratio,
        "nyquist_fraction": rate.nyquist_ratio,
        "radar_carrier_hz": cfg.radar.carrier,
        "radar_b_h_hz": cfg.radar.b_h,
        "n_delay_bins": cfg.radar.n_delay_bins,
        "n_pulses": cfg.radar.n_pulses,
        "p_fa": cfg.radar.p_fa,
        "glrt_model": cfg.radar.glrt_model,
        "n_targets": cfg.scene.n_targets,
        "recovery_budget_feasible": req.feasible,
        "min_coeffs": req.k_min,
        "min_pulses": req.p_min,
    }


def _prune_support(
    estimate, support: SliceSupport, grid: GridSpec, prune_db: float | None
) -> SliceSupport:
    """Drop recovered slices whose energy trails the strongest by > prune_db.

    The greedy recovery spends its full budget, so under noise the raw
    support carries spurious low-energy slices; this is the pipeline's model
    order selection. The result is re-symmetrized so mirror slices survive
    together.
    """
    if prune_db is None or len(support) == 0:
        return support
    energies = np.sum(np.abs(estimate.x_hat) ** 2, axis=1)
    rows = support.to_array()
    ref = float(energies[rows].max())
    if ref <= 0.0:
        return support
    cutoff = ref * 10.0 ** (-prune_db / 10.0)
    kept = SliceSupport(int(i) for i in rows if energies[i] >= cutoff)
    return kept.symmetrized(grid.n_slices)


def _sense_once(
    cfg: ScenarioConfig,
    grid: GridSpec,
    a: SensingMatrix,
    specs: Sequence[CommTransmissionSpec],
    s_r: SliceSupport,
    radar_wave: RadarWaveformSpec | None,
    seed_path: tuple,
):
    """Generate the shared medium for one sensing pass and run recovery.

    Returns the raw sensing result plus the pipeline's operational view:
    the pruned comm slice support and the frequency set used for masking
    (sub-slice refined when configured, slice-granular otherwise).
    """
    comm_x, f_c_true, s_c_true = gen_comm_slices(
        specs, grid, cfg.comm.noise_psd, _child_seed(cfg.seed, "comm", *seed_path)
    )
    x = comm_x
    if radar_wave is not None:
        x = x + radar_slices(
            radar_wave, cfg.radar.carrier, grid, cfg.radar.p_t,
            _child_seed(cfg.seed, "rslice", *seed_path),
        )
    z = xample(x, a)
    result = sense_spectrum(
        z, a, grid, s_r=s_r,
        n_sig_cap=cfg.comm.n_sig_effective,
        refine_db=cfg.comm.refine_db,
    )
    s_c_hat = _prune_support(result.estimate, result.comm_support, grid, cfg.comm.prune_db)
    if cfg.comm.refine_db is not None:
        f_c_op = result.f_c
    else:
        f_c_op = support_to_freqs(s_c_hat, grid)
    return result, s_c_hat, f_c_op, f_c_true, s_c_true


# ---------------------------------------------------------------------------
# single-shot runs


_SPECX_TRIAL_COLUMNS = (
    "iteration", "phase", "f_c_true", "f_c_est", "comm_support_est",
    "support_exact", "f_c_changed", "f_r", "s_r", "kappa_size",
    "occupancy_ratio", "f_r_fc_disjoint", "hit_rate", "n_detections",
    "truncated", "detections", "rmse_range_m",
)
_SPECX_AGG_COLUMNS = (
    "iterations", "converged", "band_selections", "final_hit_rate",
    "final_support_exact", "final_occupancy_ratio", "final_kappa_size",
    "total_detections",
)


def run_specx(cfg: ScenarioConfig) -> RunReport:
    """Execute the full coexistence loop and return its report.

    Raises InfeasibleError when the configured scene cannot be recovered
    even without noise; ConfigError for inconsistent parameters.
    """
    cfg.validate()
    _require_feasible(cfg)
    grid = cfg.grid.to_grid()
    seqs = gen_mixing_sequences(
        cfg.grid.n_channels, cfg.grid.n_chips, _child_seed(cfg.seed, "mix")
    )
    a = build_sensing_matrix(seqs, grid.n_slices)
    rem = cfg.rem.to_rem()
    scene = _draw_scene(cfg, derive_rng(cfg.seed, "scene"))

    rows: list[dict[str, Any]] = []
    f_c_prev: FrequencySet | None = None
    f_r: FrequencySet | None = None
    waveform: RadarWaveformSpec | None = None
    kappa_size = None
    occupancy = None
    converged = False
    band_selections = 0

    for it in range(cfg.loop.max_iterations):
        phase = 1
        active = cfg.comm.transmissions
        if cfg.comm.phase2_transmissions is not None and it >= 1:
            active = cfg.comm.phase2_transmissions
            phase = 2
        if f_r is None:
            s_r = SliceSupport()
        else:
            s_r = radar_slice_support(f_r.shifted(cfg.radar.carrier), grid)
        result, s_c_hat, f_c_hat, f_c_true, s_c_true = _sense_once(
            cfg, grid, a, active, s_r, waveform, (it,)
        )
        changed = f_c_prev is None or f_c_hat != f_c_prev
        row: dict[str, Any] = {
            "iteration": it,
            "phase": phase,
            "f_c_true": f_c_true.to_pairs(),
            "f_c_est": f_c_hat.to_pairs(),
            "comm_support_est": list(s_c_hat),
            "support_exact": list(s_c_hat) == list(s_c_true),
            "f_c_changed": changed,
            "f_r": f_r.to_pairs() if f_r is not None else None,
            "s_r": list(s_r),
            "kappa_size": kappa_size,
            "occupancy_ratio": occupancy,
            "f_r_fc_disjoint": None,
            "hit_rate": None,
            "n_detections": None,
            "truncated": None,
            "detections": None,
            "rmse_range_m": None,
        }
        if not changed:
            converged = True
            rows.append(row)
            break
        f_c_prev = f_c_hat
        f_c_base = f_c_hat.shifted(-cfg.radar.carrier).intersection(rem.span)
        _, f_r = select_bands(rem, f_c_base, cfg.radar.n_bands)
        band_selections += 1
        radar = _radar_run(
            cfg, f_r, scene, cfg.radar.noise_var, _child_seed(cfg.seed, "radar", it)
        )
        waveform = radar.pop("waveform")
        radar.pop("gamma")
        radar.pop("hit_flags")
        kappa_size = radar["kappa_size"]
        occupancy = radar["occupancy_ratio"]
        row.update(radar)
        row["f_r"] = f_r.to_pairs()
        row["f_r_fc_disjoint"] = f_r.intersection(f_c_base).measure() == 0.0
        rows.append(row)

    last = rows[-1]
    aggregates = [
        {
            "iterations": len(rows),
            "converged": converged,
            "band_selections": band_selections,
            "final_hit_rate": next(
                (r["hit_rate"] for r in reversed(rows) if r["hit_rate"] is not None), None
            ),
            "final_support_exact": last["support_exact"],
            "final_occupancy_ratio": occupancy,
            "final_kappa_size": kappa_size,
            "total_detections": sum(r["n_detections"] or 0 for r in rows),
        }
    ]
    meta = _base_meta(cfg, grid)
    meta["radar_occupancy_ratio"] = occupancy
    meta["loop_cap"] = cfg.loop.max_iterations
    return RunReport(
        run_id=cfg.run_id,
        meta=meta,
        aggregate_columns=_SPECX_AGG_COLUMNS,
        aggregates=tuple(aggregates),
        trial_columns=_SPECX_TRIAL_COLUMNS,
        trials=tuple(rows),
    )


def run_sense(cfg: ScenarioConfig) -> RunReport:
    """Single sensing pass on the phase-1 comm signal, no radar on the air."""
    cfg.validate()
    grid = cfg.grid.to_grid()
    seqs = gen_mixing_sequences(
        cfg.grid.n_channels, cfg.grid.n_chips, _child_seed(cfg.seed, "mix")
    )
    a = build_sensing_matrix(seqs, grid.n_slices)
    result, s_c_hat, f_c_op, f_c_true, s_c_true = _sense_once(
        cfg, grid, a, cfg.comm.transmissions, SliceSupport(), None, (0,)
    )
    row = {
        "f_c_true": f_c_true.to_pairs(),
        "f_c_est": f_c_op.to_pairs(),
        "comm_support_true": list(s_c_true),
        "comm_support_est": list(s_c_hat),
        "support_exact": list(s_c_hat) == list(s_c_true),
        "frame_rank": result.frame_rank,
    }
    agg = {
        "support_exact": row["support_exact"],
        "n_slices_est": len(s_c_hat),
        "n_slices_true": len(s_c_true),
    }
    return RunReport(
        run_id=f"{cfg.run_id}-sense",
        meta=_base_meta(cfg, grid),
        aggregate_columns=tuple(agg),
        aggregates=(agg,),
        trial_columns=tuple(row),
        trials=(row,),
    )


def run_select_bands(cfg: ScenarioConfig) -> RunReport:
    """Sense the comm support, then pick the radar bands away from it."""
    cfg.validate()
    grid = cfg.grid.to_grid()
    seqs = gen_mixing_sequences(
        cfg.grid.n_channels, cfg.grid.n_chips, _child_seed(cfg.seed, "mix")
    )
    a = build_sensing_matrix(seqs, grid.n_slices)
    rem = cfg.rem.to_rem()
    result, _, f_c_op, f_c_true, _ = _sense_once(
        cfg, grid, a, cfg.comm.transmissions, SliceSupport(), None, (0,)
    )
    f_c_base = f_c_op.shifted(-cfg.radar.carrier).intersection(rem.span)
    bsv, f_r = select_bands(rem, f_c_base, cfg.radar.n_bands)
    kappa = make_kappa(f_r, cfg.radar.b_h, cfg.radar.n_delay_bins)
    row = {
        "f_c_est": f_c_op.to_pairs(),
        "f_r": f_r.to_pairs(),
        "n_blocks": bsv.blocks,
        "occupancy_ratio": f_r.measure() / cfg.radar.b_h,
        "kappa_size": kappa.k,
        "f_r_fc_disjoint": f_r.intersection(f_c_base).measure() == 0.0,
    }
    agg = {k: row[k] for k in ("n_blocks", "occupancy_ratio", "kappa_size")}
    meta = _base_meta(cfg, grid)
    meta["radar_occupancy_ratio"] = row["occupancy_ratio"]
    return RunReport(
        run_id=f"{cfg.run_id}-bands",
        meta=meta,
        aggregate_columns=tuple(agg),
        aggregates=(agg,),
        trial_columns=tuple(row),
        trials=(row,),
    )


def run_radar(cfg: ScenarioConfig) -> RunReport:
    """Radar-only run: bands selected against the true comm support."""
    cfg.validate()
    _require_feasible(cfg)
    grid = cfg.grid.to_grid()
    rem = cfg.rem.to_rem()
    _, f_c_true, _ = gen_comm_slices(
        cfg.comm.transmissions, grid, cfg.comm.noise_psd, _child_seed(cfg.seed, "comm", 0)
    )
    f_c_base = f_c_true.shifted(-cfg.radar.carrier).intersection(rem.span)
    _, f_r = select_bands(rem, f_c_base, cfg.radar.n_bands)
    scene = _draw_scene(cfg, derive_rng(cfg.seed, "scene"))
    radar = _radar_run(cfg, f_r, scene, cfg.radar.noise_var, _child_seed(cfg.seed, "radar", 0))
    rows = []
    for i, det in enumerate(radar["detections"]):
        delay, doppler, re, im, stat = det
        rows.append(
            {
                "index": i,
                "delay_s": delay,
                "doppler_hz": doppler,
                "range_m": float(delay_to_range_m(delay)),
                "amp_re": re,
                "amp_im": im,
                "statistic": stat,
            }
        )
    agg = {
        "hit_rate": radar["hit_rate"],
        "n_detections": radar["n_detections"],
        "truncated": radar["truncated"],
        "kappa_size": radar["kappa_size"],
        "occupancy_ratio": radar["occupancy_ratio"],
        "rmse_range_m": radar["rmse_range_m"],
    }
    meta = _base_meta(cfg, grid)
    meta["radar_occupancy_ratio"] = radar["occupancy_ratio"]
    return RunReport(
        run_id=f"{cfg.run_id}-radar",
        meta=meta,
        aggregate_columns=tuple(agg),
        aggregates=(agg,),
        trial_columns=(
            "index", "delay_s", "doppler_hz", "range_m", "amp_re", "amp_im", "statistic"
        ),
        trials=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo sweeps


def _random_transmissions(
    cfg: ScenarioConfig, avoid: FrequencySet, rng: np.random.Generator
) -> tuple[CommTransmissionSpec, ...]:
    """Per-trial carrier draw, rejecting positions inside the avoid zone."""
    out = []
    half_nyq = cfg.grid.f_nyq / 2.0
    for spec in cfg.comm.transmissions:
        half = spec.bandwidth / 2.0
        lo = -(half_nyq - cfg.grid.f_p / 2.0 - half)
        hi = half_nyq - cfg.grid.f_p / 2.0 - half
        while True:
            c = float(rng.uniform(lo, hi))
            band = FrequencySet([(c - half, c + half)])
            if band.union(band.mirrored()).intersection(avoid).measure() == 0.0:
                break
        out.append(replace(spec, carrier=c))
    return tuple(out)


def _radar_avoid_zone(cfg: ScenarioConfig) -> FrequencySet:
    pad = 1.5 * cfg.grid.f_p
    lo = cfg.radar.carrier - cfg.radar.b_h / 2.0 - pad
    hi = cfg.radar.carrier + cfg.radar.b_h / 2.0 + pad
    zone = FrequencySet([(lo, hi)])
    return zone.union(zone.mirrored())


def _index_ratio(est: SliceSupport, truth: SliceSupport) -> float:
    if len(truth) == 0:
        return 1.0
    return len(est.intersection(truth)) / len(truth)


def _trial_snr(args: tuple) -> dict[str, Any]:
    cfg, snr_db, point_idx, trial = args
    grid = cfg.grid.to_grid()
    seqs = gen_mixing_sequences(
        cfg.grid.n_channels, cfg.grid.n_chips, _child_seed(cfg.seed, "mix")
    )
    a = build_sensing_matrix(seqs, grid.n_slices)
    rem = cfg.rem.to_rem()
    rng = derive_rng(cfg.seed, "snr", point_idx, trial)
    specs = _random_transmissions(cfg, _radar_avoid_zone(cfg), rng)
    comm_x, f_c_true, s_c_true = gen_comm_slices(
        specs, grid, 0.0, _child_seed(cfg.seed, "snr-comm", point_idx, trial)
    )
    f_c_base = f_c_true.shifted(-cfg.radar.carrier).intersection(rem.span)
    _, f_r = select_bands(rem, f_c_base, cfg.radar.n_bands)
    waveform = design_radar_waveform(
        _flat_base(cfg.radar.n_delay_bins), cfg.radar.b_h, f_r, cfg.radar.p_t
    )
    x = comm_x + radar_slices(
        waveform, cfg.radar.carrier, grid, cfg.radar.p_t,
        _child_seed(cfg.seed, "snr-rslice", point_idx, trial),
    )
    s_r = radar_slice_support(f_r.shifted(cfg.radar.carrier), grid)
    # SNR is defined against the comm signal alone; the radar emission is
    # interference at a fixed power, not part of the signal being detected
    p_sig = float(np.mean(np.abs(xample(comm_x, a).z) ** 2))
    noise_var = p_sig * 10.0 ** (-snr_db / 10.0)
    z = xample(x, a, noise_var, _child_seed(cfg.seed, "snr-noise", point_idx, trial))

    # score against slices holding non-negligible comm power: same relative
    # floor as the readout prune, with a 3 dB guard band so knife-edge slices
    # (a carrier sliver straddling a slice boundary) cannot flip the outcome
    energies = np.sum(np.abs(comm_x.values) ** 2, axis=1)
    strongest = max(energies[i] for i in s_c_true)
    floor = strongest * 10.0 ** (-max(cfg.comm.prune_db - 3.0, 0.0) / 10.0)
    s_c_true = SliceSupport([i for i in s_c_true if energies[i] >= floor])

    n_sig = cfg.comm.n_sig_effective
    frame = build_frame(z)
    sup_pks = omp_pks(frame, a, s_r, k_extra=4 * n_sig)
    est_pks = recover_slices(z, a, sup_pks)
    pks_comm = _prune_support(
        est_pks, sup_pks.difference(s_r), grid, cfg.comm.prune_db
    ).symmetrized(grid.n_slices)
    # the radar-unaware receiver budgets sparsity for the comm signals only,
    # so the radar emission competes for its greedy picks
    sup_omp = somp(frame, a, max_sparsity=4 * n_sig)
    est_omp = recover_slices(z, a, sup_omp)
    omp_comm = _prune_support(
        est_omp, sup_omp.difference(s_r), grid, cfg.comm.prune_db
    ).symmetrized(grid.n_slices)
    return {
        "snr_db": snr_db,
        "trial": trial,
        "pd_omp": _index_ratio(omp_comm, s_c_true),
        "pd_pks": _index_ratio(pks_comm, s_c_true),
        "exact_omp": list(omp_comm) == list(s_c_true),
        "exact_pks": list(pks_comm) == list(s_c_true),
        "noise_var": noise_var,
    }


def _trial_band(args: tuple) -> dict[str, Any]:
    cfg, layout, snr_db, point_idx, trial = args
    r = cfg.radar
    f_r = band_layout(layout, r.b_h, r.n_bands, cfg.sweep.occupancy, r.n_delay_bins)
    scene = _draw_scene(cfg, derive_rng(cfg.seed, "band-scene", point_idx, trial))
    noise_var = (r.p_t / (r.b_h * r.pri**2)) * 10.0 ** (-snr_db / 10.0)
    radar = _radar_run(
        cfg, f_r, scene, noise_var, _child_seed(cfg.seed, "band-radar", point_idx, trial)
    )
    return {
        "band_layout": layout,
        "snr_db": snr_db,
        "trial": trial,
        "hit_rate": radar["hit_rate"],
        "n_detections": radar["n_detections"],
        "truncated": radar["truncated"],
        "rmse_range_m": radar["rmse_range_m"],
        "kappa_size": radar["kappa_size"],
    }


def _trial_channels(args: tuple) -> dict[str, Any]:
    cfg, m, point_idx, trial = args
    grid = cfg.grid.to_grid()
    seqs = gen_mixing_sequences(m, cfg.grid.n_chips, _child_seed(cfg.seed, "mix"))
    a = build_sensing_matrix(seqs, grid.n_slices)
    rem = cfg.rem.to_rem()
    rng = derive_rng(cfg.seed, "chan", point_idx, trial)
    specs = _random_transmissions(cfg, _radar_avoid_zone(cfg), rng)
    comm_x, f_c_true, s_c_true = gen_comm_slices(
        specs, grid, 0.0, _child_seed(cfg.seed, "chan-comm", point_idx, trial)
    )
    f_c_base = f_c_true.shifted(-cfg.radar.carrier).intersection(rem.span)
    _, f_r = select_bands(rem, f_c_base, cfg.radar.n_bands)
    waveform = design_radar_waveform(
        _flat_base(cfg.radar.n_delay_bins), cfg.radar.b_h, f_r, cfg.radar.p_t
    )
    x = comm_x + radar_slices(
        waveform, cfg.radar.carrier, grid, cfg.radar.p_t,
        _child_seed(cfg.seed, "chan-rslice", point_idx, trial),
    )
    s_r = radar_slice_support(f_r.shifted(cfg.radar.carrier), grid)
    z_clean = xample(x, a)
    p_sig = float(np.mean(np.abs(z_clean.z) ** 2))
    noise_var = p_sig * 10.0 ** (-cfg.sweep.channels_snr_db / 10.0)
    z = xample(x, a, noise_var, _child_seed(cfg.seed, "chan-noise", point_idx, trial))
    sup = omp_pks(build_frame(z), a, s_r, k_extra=4 * cfg.comm.n_sig_effective)
    est = recover_slices(z, a, sup)
    comm = _prune_support(
        est, sup.difference(s_r), grid, cfg.comm.prune_db
    ).symmetrized(grid.n_slices)
    return {
        "n_channels": m,
        "trial": trial,
        "pd_pks": _index_ratio(comm, s_c_true),
        "exact_pks": list(comm) == list(s_c_true),
    }


def _ci95(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return 0.0
    return float(1.96 * arr.std(ddof=1) / math.sqrt(arr.size))


def _resolve_workers(cfg: ScenarioConfig, workers: int | None) -> int:
    requested = workers if workers is not None else cfg.sweep.workers
    if requested < 1:
        requested = 1
    cap = os.environ.get("SPECX_WORKERS", "")
    if cap.strip():
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            pass
    return requested


def _run_trials(fn, tasks: list[tuple], workers: int) -> list[dict[str, Any]]:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def sweep(cfg: ScenarioConfig, axis: str, workers: int | None = None) -> RunReport:
    """Monte-Carlo sweep along one axis; deterministic for a fixed seed.

    snr re-senses randomized comm layouts under channel noise and compares
    plain greedy recovery against the radar-aware variant; band_placement
    scores radar hit rates for scripted transmit layouts; channels varies
    the sampler's channel count. Trial records carry every per-run metric
    the aggregates are computed from.
    """
    cfg.validate()
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}")
    n_workers = _resolve_workers(cfg, workers)
    n_trials = cfg.sweep.n_trials
    grid = cfg.grid.to_grid()
    meta = _base_meta(cfg, grid)
    meta["axis"] = axis
    meta["n_trials"] = n_trials

    if axis == "snr":
        if not cfg.sweep.snr_db:
            raise ConfigError("sweep.snr_db must be non-empty")
        tasks = [
            (cfg, snr, i, t)
            for i, snr in enumerate(cfg.sweep.snr_db)
            for t in range(n_trials)
        ]
        rows = _run_trials(_trial_snr, tasks, n_workers)
        trial_columns = (
            "snr_db", "trial", "pd_omp", "pd_pks", "exact_omp", "exact_pks", "noise_var"
        )
        aggregates = []
        for i, snr in enumerate(cfg.sweep.snr_db):
            chunk = rows[i * n_trials : (i + 1) * n_trials]
            pd_omp = [r["pd_omp"] for r in chunk]
            pd_pks = [r["pd_pks"] for r in chunk]
            aggregates.append(
                {
                    "snr_db": snr,
                    "n_trials": n_trials,
                    "pd_omp": float(np.mean(pd_omp)),
                    "pd_pks": float(np.mean(pd_pks)),
                    "ci95_omp": _ci95(pd_omp),
                    "ci95_pks": _ci95(pd_pks),
                    "exact_rate_omp": float(np.mean([r["exact_omp"] for r in chunk])),
                    "exact_rate_pks": float(np.mean([r["exact_pks"] for r in chunk])),
                }
            )
        agg_columns = (
            "snr_db", "n_trials", "pd_omp", "pd_pks", "ci95_omp", "ci95_pks",
            "exact_rate_omp", "exact_rate_pks",
        )
    elif axis == "band_placement":
        _require_feasible(cfg)
        snr_grid = cfg.sweep.band_snr_db or cfg.sweep.snr_db
        if not cfg.sweep.band_layouts or not snr_grid:
            raise ConfigError("sweep.band_layouts and the SNR grid must be non-empty")
        points = [
            (layout, snr) for layout in cfg.sweep.band_layouts for snr in snr_grid
        ]
        tasks = [
            (cfg, layout, snr, i, t)
            for i, (layout, snr) in enumerate(points)
            for t in range(n_trials)
        ]
        rows = _run_trials(_trial_band, tasks, n_workers)
        trial_columns = (
            "band_layout", "snr_db", "trial", "hit_rate", "n_detections",
            "truncated", "rmse_range_m", "kappa_size",
        )
        aggregates = []
        for i, (layout, snr) in enumerate(points):
            chunk = rows[i * n_trials : (i + 1) * n_trials]
            rates = [r["hit_rate"] for r in chunk]
            aggregates.append(
                {
                    "band_layout": layout,
                    "snr_db": snr,
                    "hit_rate": float(np.mean(rates)),
                    "ci95": _ci95(rates),
                }
            )
        agg_columns = ("band_layout", "snr_db", "hit_rate", "ci95")
        meta["occupancy"] = cfg.sweep.occupancy
    else:
        if not cfg.sweep.channel_counts:
            raise ConfigError("sweep.channel_counts must be non-empty")
        tasks = [
            (cfg, m, i, t)
            for i, m in enumerate(cfg.sweep.channel_counts)
            for t in range(n_trials)
        ]
        rows = _run_trials(_trial_channels, tasks, n_workers)
        trial_columns = ("n_channels", "trial", "pd_pks", "exact_pks")
        aggregates = []
        for i, m in enumerate(cfg.sweep.channel_counts):
            chunk = rows[i * n_trials : (i + 1) * n_trials]
            pd = [r["pd_pks"] for r in chunk]
            rate = total_rate(m, cfg.grid.f_s, grid)
            aggregates.append(
                {
                    "n_channels": m,
                    "n_trials": n_trials,
                    "pd_pks": float(np.mean(pd)),
                    "ci95": _ci95(pd),
                    "exact_rate": float(np.mean([r["exact_pks"] for r in chunk])),
                    "f_total_hz": rate.f_total,
                    "rate_ratio": rate.channel_ratio,
                }
            )
        agg_columns = (
            "n_channels", "n_trials", "pd_pks", "ci95", "exact_rate",
            "f_total_hz", "rate_ratio",
        )
        meta["channels_snr_db"] = cfg.sweep.channels_snr_db

    return RunReport(
        run_id=f"{cfg.run_id}-{axis}",
        meta=meta,
        aggregate_columns=agg_columns,
        aggregates=tuple(aggregates),
        trial_columns=trial_columns,
        trials=tuple(rows),
    )

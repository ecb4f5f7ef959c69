"""End-to-end acceptance checks for the whole library.

Each test prints one [PASS]/[FAIL] verdict line with its headline numbers
(visible even under pytest's capture) and then asserts the same condition.
The Monte-Carlo checks pin operating points that were chosen once and are
not tuned per run; seeds are fixed so every run sees the same draws.
"""

import itertools
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from _oracles import mixed_channel_spectrum  # noqa: E402

from specx import (  # noqa: E402
    BandSelectionError,
    CommTransmissionSpec,
    FrequencySet,
    GridSpec,
    MappingMatrix,
    PulseTrainSpec,
    RemGrid,
    SliceSpectrum,
    SliceSupport,
    TargetScene,
    build_sensing_matrix,
    design_radar_waveform,
    doppler_focus,
    focused_noise_var,
    focused_omp,
    gen_comm_slices,
    gen_mixing_sequences,
    glrt_threshold,
    make_kappa,
    partial_fourier,
    radar_fourier_coeffs,
    radar_slice_support,
    radar_slices,
    select_bands,
    sense_spectrum,
    total_rate,
    xample,
)
from specx.bands import struct_omp  # noqa: E402
from specx.pipeline import load_config, run_specx, sweep  # noqa: E402
from specx.report import emit_report  # noqa: E402


def announce(capsys, ok, name, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# -- 1: exact recovery at the minimum coefficient/pulse budget ------------------


def test_exact_recovery_at_minimum_budget(capsys):
    """Noiseless on-grid scenes with K = 2L coefficients and P = 2L pulses
    recover every target exactly.

    The sensed coefficient run is contiguous at a random offset: consecutive
    rows of the delay dictionary keep every pair of columns independent, which
    an arbitrary index set on a composite grid size does not guarantee.
    """
    b_h = 1.6e6
    n_delay = 64
    pri = n_delay / b_h
    delta = b_h / n_delay
    rng = np.random.default_rng(20260815)
    n_trials = 500
    t0 = time.time()
    ok_count = 0
    for _ in range(n_trials):
        l = int(rng.integers(1, 6))
        k = 2 * l
        off = int(rng.integers(0, n_delay - k + 1))
        lo = (off - n_delay / 2) * delta
        band = FrequencySet([(lo, lo + k * delta)])
        kappa = make_kappa(band, b_h, n_delay)
        assert kappa.k == k
        wave = design_radar_waveform(np.ones(n_delay, complex), b_h, band, 1.0)
        train = PulseTrainSpec(pri=pri, n_pulses=k)
        dbins = rng.choice(n_delay, size=l, replace=False)
        nubins = rng.choice(k, size=l, replace=False)
        amps = np.exp(2j * np.pi * rng.uniform(size=l))
        scene = TargetScene(
            delays=dbins * pri / n_delay,
            dopplers=train.doppler_grid()[nubins],
            amplitudes=amps,
        )
        coeffs = radar_fourier_coeffs(scene, wave, train, kappa)
        focused = doppler_focus(coeffs, wave, kappa, train)
        dets = focused_omp(focused, partial_fourier(kappa), 0.0, 0.0, max_iter=2 * l)
        got = {(d.delay_bin, d.doppler_bin): d.amplitude for d in dets}
        want = {(int(d), int(nu)): a for d, nu, a in zip(dbins, nubins, amps)}
        ok_count += (
            not dets.truncated
            and set(got) == set(want)
            and all(abs(got[kk] - want[kk]) <= 1e-6 * abs(want[kk]) for kk in want)
        )
    elapsed = time.time() - t0
    ok = ok_count >= 0.99 * n_trials and elapsed < 60.0
    announce(
        capsys, ok, "exact recovery at minimum budget",
        f"{ok_count}/{n_trials} scenes exact (need >=495), {elapsed:.1f}s (limit 60)",
    )


# -- 2: sampler equals a dense time-domain mixing oracle ------------------------


def test_sampler_matches_time_domain_oracle(capsys):
    """Slice-domain channel outputs match exact chip-by-chip integration of
    the mixed, filtered, decimated waveform on random scenarios."""
    rng = np.random.default_rng(20260815 + 2)
    t0 = time.time()
    worst = 0.0
    n_scen = 50
    for trial in range(n_scen):
        n = int(rng.choice([6, 10, 16, 24, 32]))
        n_grid = int(rng.choice([4, 8]))
        grid = GridSpec(f_nyq=(n - 1) * 10e6, f_p=10e6, f_s=10e6, n_grid=n_grid)
        m = int(rng.integers(3, 9))
        seqs = gen_mixing_sequences(m, n, seed=7000 + trial)
        a = build_sensing_matrix(seqs, n)
        vals = np.zeros((n, n_grid), dtype=complex)
        for r in rng.choice(n, size=int(rng.integers(1, 5)), replace=False):
            cols = rng.choice(n_grid, size=int(rng.integers(1, n_grid + 1)), replace=False)
            vals[r, cols] = rng.standard_normal(cols.size) + 1j * rng.standard_normal(
                cols.size
            )
        x = SliceSpectrum(vals, grid)
        z = xample(x, a).z
        ref = mixed_channel_spectrum(x, seqs, grid)
        worst = max(
            worst, np.linalg.norm(z - ref) / max(np.linalg.norm(ref), 1e-30)
        )
    elapsed = time.time() - t0
    ok = worst < 1e-6 and elapsed < 120.0
    announce(
        capsys, ok, "sampler vs time-domain oracle",
        f"worst rel RMS {worst:.2e} over {n_scen} scenarios (limit 1e-6), "
        f"{elapsed:.1f}s (limit 120)",
    )


# -- 3: known-support recovery at the reduced channel count ---------------------


def test_known_support_recovery_at_reduced_channels(capsys):
    """With the radar slices known, a channel count well under Nyquist (and
    over the 2K + |S_R| identifiability floor) recovers the comm support
    exactly on noiseless draws through the seeded-greedy readout."""
    grid = GridSpec(f_nyq=780e6, f_p=20e6, f_s=20e6, n_grid=32)  # 40 slices
    wave = design_radar_waveform(
        np.ones(32, complex), 3e6, FrequencySet([(-1.5e6, 1.5e6)]), 1.0
    )
    radar_carrier = 96.5e6
    s_r = radar_slice_support(FrequencySet([(95e6, 98e6)]), grid)
    assert s_r == SliceSupport([15, 25])
    n = grid.n_slices
    m = 24  # 60% of Nyquist; the floor below is 10
    # positive-half slices away from the radar pair and the band edge
    cand = np.array([i for i in range(n // 2 + 1, n - 1) if i != 25])
    rng = np.random.default_rng(20260815 + 3)
    n_trials = 500
    ok_count = 0
    for trial in range(n_trials):
        picks = rng.choice(cand, size=2, replace=False)
        specs = [
            CommTransmissionSpec(carrier=(int(i) - n // 2) * 20e6, bandwidth=8e6)
            for i in picks
        ]
        comm_x, _, s_c = gen_comm_slices(specs, grid, seed=8000 + trial)
        assert len(s_c) == 4  # two carriers plus mirrors
        assert m >= 2 * len(s_c) + len(s_r)  # identifiability floor
        seqs = gen_mixing_sequences(m, n, seed=9000 + trial)
        a = build_sensing_matrix(seqs, n)
        x = comm_x + radar_slices(wave, radar_carrier, grid, 1.0, seed=8500 + trial)
        z = xample(x, a)
        res = sense_spectrum(z, a, grid, s_r=s_r, n_sig_cap=2)
        ok_count += res.comm_support == s_c
    ok = ok_count >= 0.99 * n_trials
    announce(
        capsys, ok, "known-support recovery at reduced channels",
        f"{ok_count}/{n_trials} exact supports with m=24 of 40 slices (need >=495)",
    )


# -- 4: detection curves vs SNR --------------------------------------------------


def _significant_inversions(points):
    """Count decreases larger than the combined 95% bands of the two points."""
    bad = 0
    for (pa, ca), (pb, cb) in zip(points, points[1:]):
        if pb < pa - math.hypot(ca, cb):
            bad += 1
    return bad


def test_detection_curves_vs_snr(capsys):
    """Support-aware greedy recovery dominates the radar-unaware receiver at
    every SNR, and both detection curves rise monotonically."""
    cfg = load_config("desk")
    cfg = replace(cfg, sweep=replace(cfg.sweep, n_trials=1000))
    rep = sweep(cfg, "snr", workers=4)
    rows = list(rep.aggregates)
    gaps = [
        r["pd_pks"] - r["pd_omp"] + r["ci95_omp"] + r["ci95_pks"] for r in rows
    ]
    inv_omp = _significant_inversions([(r["pd_omp"], r["ci95_omp"]) for r in rows])
    inv_pks = _significant_inversions([(r["pd_pks"], r["ci95_pks"]) for r in rows])
    ordering = all(g >= 0.0 for g in gaps)
    ok = ordering and inv_omp <= 1 and inv_pks <= 1
    span = (
        f"pd_pks {rows[0]['pd_pks']:.3f}->{rows[-1]['pd_pks']:.3f}, "
        f"pd_omp {rows[0]['pd_omp']:.3f}->{rows[-1]['pd_omp']:.3f}"
    )
    announce(
        capsys, ok, "detection curves vs SNR",
        f"aware >= unaware at all {len(rows)} points within bands "
        f"(min slack {min(gaps):+.4f}), inversions omp={inv_omp} pks={inv_pks} "
        f"(limit 1 each); {span}",
    )


# -- 5: band placement vs hit rate and range error -------------------------------


def test_band_placement_hit_rates(capsys):
    """At matched occupancy and transmit power, spread-out bands match or beat
    the full band, which matches or beats packed adjacent bands; packed bands
    pay at least a 2x range-RMSE penalty."""
    cfg = load_config("desk")
    cfg = replace(
        cfg, sweep=replace(cfg.sweep, n_trials=1000, band_snr_db=(-18.0,))
    )
    rep = sweep(cfg, "band_placement", workers=4)
    agg = {r["band_layout"]: r for r in rep.aggregates}
    cond_rmse = {}
    n_full = {}
    for layout in agg:
        vals = [
            t["rmse_range_m"]
            for t in rep.trials
            if t["band_layout"] == layout
            and t["hit_rate"] == 1.0
            and t["rmse_range_m"] is not None
        ]
        cond_rmse[layout] = float(np.mean(vals)) if vals else float("nan")
        n_full[layout] = len(vals)

    def at_least(a, b):
        return agg[a]["hit_rate"] >= agg[b]["hit_rate"] - (
            agg[a]["ci95"] + agg[b]["ci95"]
        )

    ordering = at_least("separated", "wideband") and at_least("wideband", "adjacent")
    enough = all(v >= 100 for v in n_full.values())
    rmse_ok = (
        cond_rmse["adjacent"] >= 2.0 * cond_rmse["separated"]
        and cond_rmse["adjacent"] > cond_rmse["separated"]
    )
    ok = ordering and enough and rmse_ok
    announce(
        capsys, ok, "band placement trends",
        "hit " + " ".join(f"{k}={agg[k]['hit_rate']:.3f}" for k in agg)
        + f"; conditional range RMSE adjacent {cond_rmse['adjacent']:.2f} m vs "
        f"separated {cond_rmse['separated']:.2f} m (need >=2x)",
    )


# -- 6: false-alarm calibration ---------------------------------------------------


def test_false_alarm_calibration(capsys):
    """Empty scenes: the empirical scene-level false-alarm rate sits inside the
    95% binomial band of the requested p_fa for the central threshold model
    (the noncentral model is deliberately conservative)."""
    b_h, n_bins, n_pulses = 1.6e6, 32, 16
    pri = n_bins / b_h
    full = FrequencySet([(-b_h / 2, b_h / 2)])
    wave = design_radar_waveform(np.ones(n_bins, complex), b_h, full, 1.0)
    train = PulseTrainSpec(pri=pri, n_pulses=n_pulses)
    kappa = make_kappa(full, b_h, n_bins)
    fmat = partial_fourier(kappa)
    empty = TargetScene(
        delays=np.zeros(0), dopplers=np.zeros(0), amplitudes=np.zeros(0, complex)
    )
    rho = 5.0
    noise_var = 1.0 / (rho * full.measure())
    fvar = focused_noise_var(noise_var, wave, kappa, train)
    n_cells = n_bins * n_pulses
    gammas = {}
    for model in ("central", "noncentral"):
        for p_fa in (0.1, 0.01):
            if model == "noncentral":
                gammas[(model, p_fa)] = glrt_threshold(
                    p_fa, n_cells, rho=rho, model=model
                )
            else:
                gammas[(model, p_fa)] = glrt_threshold(p_fa, n_cells, model=model)

    n_trials = 10_000
    hits = {k: 0 for k in gammas}
    for t in range(n_trials):
        coeffs = radar_fourier_coeffs(
            empty, wave, train, kappa, noise_var=noise_var, seed=600_000 + t
        )
        focused = doppler_focus(coeffs, wave, kappa, train)
        for key, g in gammas.items():
            if len(focused_omp(focused, fmat, g, fvar, max_iter=1)):
                hits[key] += 1

    in_band = {}
    for (model, p_fa), c in hits.items():
        half = 1.96 * math.sqrt(p_fa * (1.0 - p_fa) / n_trials)
        in_band[(model, p_fa)] = abs(c / n_trials - p_fa) <= half
    matched = sorted({m for (m, p), good in in_band.items() if good})
    ok = all(in_band[("central", p)] for p in (0.1, 0.01))
    announce(
        capsys, ok, "false-alarm calibration",
        "empirical FA "
        + " ".join(
            f"{m}@{p}={hits[(m, p)] / n_trials:.4f}" for (m, p) in sorted(hits)
        )
        + f"; within-band models: {matched or 'none'} over {n_trials} empty scenes",
    )


# -- 7: band selection is near-optimal and avoids the comm bands -----------------


def _residual_after_fit(y, dmat, support):
    sub = dmat[:, sorted(support)]
    coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
    return float(np.linalg.norm(y - sub @ coef))


def _blocks_of(support):
    s = sorted(support)
    return sum(1 for j, v in enumerate(s) if j == 0 or v != s[j - 1] + 1)


def _isolated_positions(rng, p, k):
    while True:
        pos = sorted(rng.choice(p, size=k, replace=False))
        if all(b - a >= 2 for a, b in zip(pos, pos[1:])):
            return pos


def test_band_selection_near_optimal_and_disjoint(capsys):
    """Exhaustive enumeration on small maps: the greedy block-sparse support
    ranks in the best 5% of all same-size legal supports. Randomized masking:
    selected radar bands never overlap the masked comm bands."""
    rng = np.random.default_rng(20260815 + 7)
    n_inst = 30
    near_opt = 0
    for _ in range(n_inst):
        p = int(rng.choice([8, 10, 12]))
        n_b = int(rng.choice([2, 3]))
        k_dips = min(n_b + 2, (p + 1) // 2)
        y = rng.uniform(0.05, 0.15, size=p)
        dips = _isolated_positions(rng, p, k_dips)
        y[dips] = rng.uniform(5.0, 12.0, size=k_dips)
        if rng.uniform() < 0.5:
            # a masked background bin: never selectable. Masking a dip could
            # drop the quiet-region count to n_b and change the regime.
            bg = [i for i in range(p) if i not in dips]
            y[int(rng.choice(bg))] = 0.0
        d = MappingMatrix.identity(p)
        vec, _ = struct_omp(y, d, n_b=n_b, span_width=p * 1e5)
        support = set(np.flatnonzero(vec.w))
        usable = [i for i in range(p) if y[i] > 0.0]
        if not support or not support.issubset(usable) or _blocks_of(support) > n_b:
            continue  # counts as a failure: near_opt is not incremented
        mine = _residual_after_fit(y, d.d, support)
        all_res = sorted(
            _residual_after_fit(y, d.d, comb)
            for comb in itertools.combinations(usable, len(support))
            if _blocks_of(comb) <= n_b
        )
        cutoff = all_res[max(0, math.ceil(0.05 * len(all_res)) - 1)]
        near_opt += mine <= cutoff + 1e-12

    p_big, b_y, n_b = 18, 90e3, 4
    half = p_big * b_y / 2
    rng2 = np.random.default_rng(20260815 + 77)
    done = overlap = resampled = 0
    while done < 10_000:
        e = rng2.uniform(0.5, 8.0, size=p_big)
        ivs = []
        for _ in range(int(rng2.integers(0, 4))):
            lo = rng2.uniform(-half, half - b_y)
            ivs.append((lo, lo + rng2.uniform(0.2, 3.0) * b_y))
        f_c = FrequencySet(ivs)
        try:
            _, f_r = select_bands(RemGrid(energies=e, b_y=b_y), f_c, n_b)
        except BandSelectionError:
            resampled += 1
            continue
        if f_r.intersection(f_c).measure() != 0.0:
            overlap += 1
        done += 1
    ok = near_opt == n_inst and overlap == 0
    announce(
        capsys, ok, "band selection quality",
        f"{near_opt}/{n_inst} small maps inside the top-5% residual set; "
        f"{overlap}/{done} masked-trial overlaps (need 0; "
        f"{resampled} infeasible draws resampled)",
    )


# -- 8: power, rate, and interval-arithmetic identities ---------------------------


def test_power_and_rate_identities(capsys):
    rng = np.random.default_rng(20260815 + 8)
    worst_power = 0.0
    for _ in range(200):
        n = int(rng.choice([16, 24, 32, 40, 64]))
        b_h = 1.6e6
        delta = b_h / n
        bins = rng.choice(n, size=int(rng.integers(1, n // 2 + 1)), replace=False)
        bands = FrequencySet(
            [((b - n / 2) * delta, (b - n / 2 + 1) * delta) for b in bins]
        )
        base = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        p_t = float(rng.uniform(0.5, 50.0))
        wave = design_radar_waveform(base, b_h, bands, p_t)
        power = float(np.sum(np.abs(wave.spectrum) ** 2) * delta)
        worst_power = max(worst_power, abs(power - p_t) / p_t)

    rate_ok = True
    for m, f_s, grid in (
        (18, 20e6, GridSpec(f_nyq=560e6, f_p=20e6, f_s=20e6, n_grid=8)),
        (25, 154e6, GridSpec(f_nyq=10e9, f_p=154e6, f_s=154e6, n_grid=4)),
    ):
        tr = total_rate(m, f_s, grid)
        rate_ok &= tr.f_total == m * f_s
        rate_ok &= tr.channel_ratio == m / grid.n_slices
        rate_ok &= (
            abs(tr.f_total - tr.channel_ratio * (grid.n_slices * grid.f_p))
            <= 1e-12 * tr.f_total
        )

    worst_incl = 0.0
    for _ in range(100_000):
        sets = []
        for _ in range(2):
            ivs = []
            for _ in range(int(rng.integers(1, 4))):
                lo = rng.uniform(-1e6, 1e6)
                ivs.append((lo, lo + rng.uniform(0.0, 8e5)))
            sets.append(FrequencySet(ivs))
        a, b = sets
        lhs = a.union(b).measure()
        rhs = a.measure() + b.measure() - a.intersection(b).measure()
        worst_incl = max(worst_incl, abs(lhs - rhs))

    ok = worst_power <= 1e-9 and rate_ok and worst_incl <= 1e-8
    announce(
        capsys, ok, "power and rate identities",
        f"worst power renorm error {worst_power:.2e} (limit 1e-9); "
        f"rate identities exact: {rate_ok}; "
        f"worst inclusion-exclusion error {worst_incl:.2e} over 1e5 cases",
    )


# -- 9: preset runs are byte-identical across repeats -----------------------------


def test_preset_reports_reproducible(capsys, tmp_path):
    cfg = load_config("paper_sw")
    dirs = []
    for tag in ("a", "b"):
        rep = run_specx(cfg)
        out = tmp_path / tag
        out.mkdir()
        emit_report(rep, out, formats=("csv", "json"))
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].iterdir())
    same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names
    )
    total = sum((dirs[0] / n).stat().st_size for n in names)
    announce(
        capsys, same, "preset reports reproducible",
        f"{len(names)} files byte-identical across repeat runs ({total} bytes)",
    )

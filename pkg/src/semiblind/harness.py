"""Seeded Monte Carlo SNR sweeps.

Seed derivation
---------------
Every (SNR point, trial) pair gets a 64-bit seed::

    mix(z) = SplitMix64 finalizer of (z + 0x9E3779B97F4A7C15) mod 2**64
    seed   = mix(mix(mix(master_seed) ^ snr_index) ^ trial_index)

where ``mix`` is::

    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)

The trial seed feeds ``numpy.random.SeedSequence(seed).spawn(5)``; the five
child streams (PCG64) drive, in order, the channels, the schedule, the
symbols, the noise and the receiver initialization.  Because the channel and
symbol streams do not depend on the protocol or SNR value, runs with the same
master seed, SNR index and trial index share their channel and symbol draws
across protocols and receivers.

CSV format
----------
UTF-8, ``\\n`` line endings, header
``snr_db,trial,protocol,nmse_db,ber,ser,iters,converged``.  ``snr_db`` is
written with ``repr``; ``nmse_db``, ``ber`` and ``ser`` with ``%.10e``
(``nan`` when the receiver does not produce the quantity); ``iters`` is an
integer and ``converged`` is ``0`` or ``1``.  Rows are ordered by SNR index,
then trial index.  The JSON manifest is written next to the CSV
(``<output>.manifest.json``) before the first row.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import json
import logging
import math
import os
import time
import warnings

import numpy as np

from . import __version__
from .channel_model import gen_channels, gen_schedule, gen_symbols
from .config import plan_to_dict
from .errors import NumericalFailure
from .metrics import (CSV_HEADER, MetricRecord, check_identifiability, complexity_estimate,
                      demod_ber, effective_channel, nmse, resolve_scaling)
from .protocols import add_awgn, synth_p1, synth_p2
from .receivers import (IdentifiabilityWarning, npf_tals, perfect_csi_symbols, pf_tals,
                        pilot_assisted)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
WORKERS_ENV = "SEMIBLIND_WORKERS"


def splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, snr_index, trial_index):
    return splitmix64(splitmix64(splitmix64(master_seed & MASK64) ^ snr_index) ^ trial_index)


@dataclass
class TrialResult:
    record: MetricRecord
    channels: object
    schedule: object
    symbols: object
    observation: object
    output: object = None


def trial_streams(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]


def simulate(cfg, seed, snr_db):
    """Draw one realization and its observation tensor."""
    rng_ch, rng_sch, rng_sym, rng_noise, rng_init = trial_streams(seed)
    ch = gen_channels(cfg, rng_ch)
    sch = gen_schedule(cfg, rng_sch)
    sym = gen_symbols(cfg, rng_sym)
    clean = synth_p1(ch, sch, sym) if cfg.protocol == "P1" else synth_p2(ch, sch, sym)
    y = add_awgn(clean, snr_db, rng_noise, cfg.protocol)
    return ch, sch, sym, y, rng_init


def run_trial(cfg, receiver, seed, snr_db, trial=0, options=None):
    """Run one Monte Carlo trial and score it."""
    ch, sch, sym, y, rng_init = simulate(cfg, seed, snr_db)
    out = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IdentifiabilityWarning)
        if receiver == "perfect_csi_baseline":
            X_hat, _ = perfect_csi_symbols(y, sch, ch.G, ch.H)
            ber, ser = demod_ber(X_hat, sym)
            rec = MetricRecord(snr_db, trial, cfg.protocol, ber=ber, ser=ser,
                               iterations=0, converged=True)
        elif receiver == "pilot_assisted_baseline":
            out = pilot_assisted(y, sch, sym.X, options, rng_init)
            err = nmse(effective_channel(out.G_hat, out.H_hat), effective_channel(ch.G, ch.H))
            rec = MetricRecord(snr_db, trial, cfg.protocol, nmse_eff=err,
                               iterations=out.iterations, converged=out.converged)
        else:
            rx = pf_tals if receiver == "pf_tals" else npf_tals
            try:
                out = rx(y, sch, options, rng_init)
                fixed = resolve_scaling(out, sym.X[:, 0])
                err = nmse(effective_channel(fixed.G_hat, fixed.H_hat),
                           effective_channel(ch.G, ch.H))
                ber, ser = demod_ber(fixed.X_hat, sym)
                out = fixed
                rec = MetricRecord(snr_db, trial, cfg.protocol, nmse_eff=err, ber=ber,
                                   ser=ser, iterations=out.iterations, converged=out.converged)
            except (NumericalFailure, ValueError) as exc:
                log.warning("trial %d at %s dB failed: %s", trial, snr_db, exc)
                rec = MetricRecord(snr_db, trial, cfg.protocol, iterations=getattr(
                    exc, "iteration", 0), converged=False)
    return TrialResult(rec, ch, sch, sym, y, out)


def format_row(rec):
    def num(x):
        return "nan" if math.isnan(x) else ("-inf" if x == -math.inf else f"{x:.10e}")

    return ",".join([repr(float(rec.snr_db)), str(rec.trial), rec.protocol,
                     num(rec.nmse_eff_db), num(rec.ber), num(rec.ser),
                     str(int(rec.iterations)), "1" if rec.converged else "0"])


def _work(args):
    cfg, receiver, seed, snr_db, trial, options = args
    return run_trial(cfg, receiver, seed, snr_db, trial, options).record


def worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def sweep(plan, cfg, workers=None):
    """Yield one :class:`MetricRecord` per (SNR, trial), in order."""
    jobs = [(cfg, plan.receiver, derive_seed(plan.master_seed, s_idx, t), snr, t, plan.options)
            for s_idx, snr in enumerate(plan.snr_grid) for t in range(plan.trials)]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        for job in jobs:
            yield _work(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * workers)))


def output_path_for(plan, name):
    if not name:
        return plan.output_path
    stem, ext = os.path.splitext(plan.output_path)
    return f"{stem}.{name}{ext or '.csv'}"


def _manifest(plan, duration):
    configs = {}
    for name, cfg in plan.configs():
        report = check_identifiability(cfg)
        p1, p2 = complexity_estimate(cfg)
        configs[name or "base"] = {
            "output": output_path_for(plan, name),
            "identifiability": {
                "overall": report.overall,
                "conditions": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs,
                                "satisfied": c.satisfied} for c in report.conditions],
            },
            "complexity_per_iteration": {"p1": p1, "p2": p2},
        }
    return {
        "artifact_version": __version__,
        "master_seed": plan.master_seed,
        "plan": plan_to_dict(plan),
        "runs": configs,
        "duration_seconds": duration,
    }


def run_experiment(plan, workers=None):
    """Run every configuration of ``plan``; returns the list of CSV paths written."""
    start = time.perf_counter()
    manifest_path = plan.output_path + ".manifest.json"
    for name, cfg in plan.configs():
        report = check_identifiability(cfg)
        if not report.overall:
            log.warning("%s: identifiability conditions violated: %s", name or "base",
                        "; ".join(l for l in report.lines() if "VIOLATED" in l))
    with open(manifest_path, "w") as fh:
        json.dump(_manifest(plan, None), fh, indent=2)
    paths = []
    for name, cfg in plan.configs():
        path = output_path_for(plan, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(CSV_HEADER) + "\n")
            for rec in sweep(plan, cfg, workers):
                fh.write(format_row(rec) + "\n")
        paths.append(path)
    with open(manifest_path, "w") as fh:
        json.dump(_manifest(plan, time.perf_counter() - start), fh, indent=2)
    return paths


def rerun_trial(plan, snr_index, trial, name=""):
    """Recompute the record of a single (SNR, trial) cell of ``plan``."""
    cfg = dict(plan.configs())[name]
    seed = derive_seed(plan.master_seed, snr_index, trial)
    return run_trial(cfg, plan.receiver, seed, plan.snr_grid[snr_index], trial,
                     plan.options).record

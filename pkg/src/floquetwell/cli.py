"""Command-line front end.

Every command writes plot-ready CSV (or JSON) files under ``--out`` whose
first line is a ``#``-prefixed JSON provenance header.  Exit codes: 0 on
success, 1 for usage errors, 2 when a numerical contract fails; failures
also leave ``error.json`` in the output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import __version__, basis, classical, crossings, floquet, husimi, spectra
from .config import RunConfig, atomic_write, parse_pair, parse_range, provenance, write_csv

logger = logging.getLogger("floquetwell")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class ContractError(Exception):
    """A verification check or numerical contract did not hold."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m")


def _grid(lo: float, hi: float, step: float, extra=()) -> np.ndarray:
    """``lo, lo+step, ..., <= hi`` merged with the points ``extra``."""
    n = int(np.floor((hi - lo) / step + 1e-9))
    g = np.round(lo + step * np.arange(n + 1), 12)
    return np.union1d(g, np.asarray(extra, dtype=float))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _range(text: str):
    try:
        return parse_range(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _pair(text: str, sep=":"):
    try:
        return parse_pair(text, sep)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- commands


def cmd_strobe(cfg: RunConfig, args) -> list[str]:
    st = cfg.strobe
    m = cfg.model
    if st.orbits > 0:
        rng = np.random.default_rng(cfg.seed)
        thetas = rng.uniform(-np.pi, np.pi, st.orbits)
        actions = rng.uniform(st.J_lo, st.J_hi, st.orbits)
        seeds = [classical.from_action_angle(float(t), float(J)) for t, J in zip(thetas, actions)]
    else:
        seeds = classical.default_seeds()
    out = []
    for eps in st.epsilons:
        jobs = [(s, st.periods, eps, m.omega0) for s in seeds]
        samples = np.array(_map(_strobe_one, jobs, cfg.threads))
        extra = {"epsilon": eps, "omega0": m.omega0, "periods": st.periods, "orbits": len(seeds),
                 "resonance_action": classical.resonance_action(m.omega0), "strobe_phase": "t=0"}
        if args.island:
            center, elliptic = classical.island_center(eps, m.omega0)
            extra["island_center"] = {"theta": center.theta, "J": center.J, "elliptic": bool(elliptic)}
        path = os.path.join(cfg.out, f"strobe_eps{_tag(eps)}.csv")
        rows = ((i, k, float(th), float(J)) for i, orb in enumerate(samples) for k, (th, J) in enumerate(orb))
        write_csv(path, provenance(cfg, "strobe", **extra), ["orbit_id", "period_index", "theta", "J"], rows)
        out.append(path)
    return out


def _scan_rows(sc: floquet.Scan, curves: int | None):
    cols = [i for i, l in enumerate(sc.labels) if curves is None or l <= curves]
    for k, e in enumerate(sc.epsilons):
        for i in cols:
            yield float(e), int(sc.labels[i]), float(sc.quasienergies[k, i]), int(sc.parity[k, i])


def _run_scan(cfg: RunConfig, lo, hi, step, watch, keep_states=True, extra=()):
    grid = _grid(lo, hi, step, extra)
    return floquet.scan(cfg.model, grid, steps_per_period=cfg.steps_per_period, watch=watch,
                        refine_below=cfg.scan.refine_below, min_step=cfg.scan.min_step,
                        keep_states=keep_states, threads=cfg.threads)


def _write_scan(cfg, sc, name, command, curves):
    path = os.path.join(cfg.out, name + ".csv")
    head = provenance(cfg, command, kappa=cfg.model.kappa, omega0=cfg.model.omega0,
                      n_basis=cfg.model.n_basis, curves=curves,
                      label_rule="dominant unperturbed level at the first epsilon")
    write_csv(path, head, ["epsilon", "curve_label", "quasienergy", "sector"], _scan_rows(sc, curves))
    side = os.path.join(cfg.out, name + ".json")
    atomic_write(side, json.dumps({**head, "diagnostics": sc.diagnostics()}, indent=1, sort_keys=True) + "\n")
    return [path, side]


def cmd_scan(cfg: RunConfig, args) -> list[str]:
    s = cfg.scan
    sc = _run_scan(cfg, s.lo, s.hi, s.step, watch=s.curves, keep_states=False)
    return _write_scan(cfg, sc, f"scan_{_tag(s.lo)}_{_tag(s.hi)}", "scan", s.curves)


def find_crossings(cfg: RunConfig, sc: floquet.Scan | None = None) -> tuple[dict, floquet.Scan]:
    """Detect, refine and classify the crossings of one bracket; returns the report."""
    cs = cfg.crossings
    labels = cs.labels or None
    if sc is None:
        watch = max(labels) if labels else cs.curves
        sc = _run_scan(cfg, cs.lo, cs.hi, cs.step, watch=watch)
    if labels is None:
        labels = [int(l) for l in sc.labels if l <= cs.curves]
    th = crossings.Thresholds(gap=cs.gap_threshold, participant=cs.participant,
                              sharp_fidelity=cs.sharp_fidelity)
    cands = crossings.detect(sc, cs.gap_threshold, labels=labels)
    refined = [crossings.refine(cfg.model, c, sc, tol=cs.tol, steps_per_period=cfg.steps_per_period)
               for c in cands]
    entries = []
    for rc in refined:
        if rc.apparent:
            entries.append({
                "epsilon_star": rc.epsilon_star, "epsilon_stars": [rc.epsilon_star], "gap_min": rc.gap_min,
                "curve_pair": list(rc.pair), "kind": "apparent", "participants": list(rc.pair),
                "exchange_fidelity": None, "overlap_matrix": None,
            })
    for group in crossings.group_overlapping(refined):
        if cs.window:
            lo, hi = cs.window
        else:
            wins = [crossings.default_window(rc, refined, scan=sc) for rc in group]
            lo, hi = min(w[0] for w in wins), max(w[1] for w in wins)
        stars = [rc.epsilon_star for rc in group]
        if not lo < min(stars) <= max(stars) < hi:
            continue
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", crossings.ContaminationWarning)
            ac = crossings.classify(cfg.model, group, lo, hi, sc, thresholds=th, others=refined,
                                    steps_per_period=cfg.steps_per_period)
        d = ac.to_json()
        d["warnings"] = [str(w.message) for w in caught]
        entries.append(d)
    entries.sort(key=lambda d: (d["epsilon_star"], d["curve_pair"]))
    return {
        "bracket": [cs.lo, cs.hi],
        "labels": labels,
        "gap_threshold": cs.gap_threshold,
        "n_candidates": len(cands),
        "crossings": entries,
        "scan": sc.diagnostics(),
    }, sc


def cmd_crossings(cfg: RunConfig, args) -> list[str]:
    cs = cfg.crossings
    report, sc = find_crossings(cfg)
    name = f"crossings_{_tag(cs.lo)}_{_tag(cs.hi)}"
    head = provenance(cfg, "crossings")
    path = os.path.join(cfg.out, name + ".json")
    atomic_write(path, json.dumps({**head, **report}, indent=1, sort_keys=True) + "\n")
    curves = max(report["labels"]) if report["labels"] else cs.curves
    out = [path]
    csv_path = os.path.join(cfg.out, name + "_curves.csv")
    write_csv(csv_path, provenance(cfg, "crossings", curves=curves),
              ["epsilon", "curve_label", "quasienergy", "sector"], _scan_rows(sc, curves))
    out.append(csv_path)
    for e in report["crossings"]:
        if e["kind"] in ("sharp", "broad"):
            print(f"{e['kind']:>8s} AC at epsilon*={e['epsilon_star']:.3f} gap={e['gap_min']:.4g} "
                  f"participants={e['participants']} fidelity={e['exchange_fidelity']:.3f}")
    return out


def tracked_states(cfg: RunConfig, epsilons, labels, track_from: float, step: float):
    """Floquet states of curves ``labels`` at ``epsilons``, with labels fixed
    by the dominant unperturbed level at ``track_from``."""
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps < track_from):
        raise UsageError("track_from must not exceed the requested epsilons")
    sc = _run_scan(cfg, track_from, float(eps.max()), step, watch=max(labels), extra=eps)
    out = []
    for e, l in zip(eps, labels):
        k = sc.index_of(e)
        out.append(sc.states[k][:, sc.column(l)])
    return out


def _labels_for(eps, labels):
    if len(labels) == 1:
        return labels * len(eps)
    if len(labels) != len(eps):
        raise UsageError("give one label, or one label per epsilon")
    return labels


def cmd_husimi(cfg: RunConfig, args) -> list[str]:
    h = cfg.husimi
    labels = _labels_for(h.epsilons, h.labels)
    states = tracked_states(cfg, h.epsilons, labels, h.track_from, h.track_step)
    out = []
    for e, l, psi in zip(h.epsilons, labels, states):
        g = husimi.husimi_grid(psi, cfg.model, sigma=h.sigma, n_theta=h.n_theta, n_J=h.n_J, J_max=h.J_max)
        head = provenance(cfg, "husimi", epsilon=e, label=l, track_from=h.track_from, sigma=h.sigma,
                          normalization=g.normalization(), participation_ratio=g.participation_ratio(),
                          J_peak=g.J_peak(), **g.meta)
        path = os.path.join(cfg.out, f"husimi_eps{_tag(e)}_label{l}.csv")
        rows = ((float(th), float(J), float(g.values[i, j]))
                for i, th in enumerate(g.theta_axis) for j, J in enumerate(g.J_axis))
        write_csv(path, head, ["theta", "J", "value"], rows)
        out.append(path)
    return out


def _spectra(cfg: RunConfig):
    s = cfg.spectrum
    labels = _labels_for(s.epsilons, s.labels)
    states = tracked_states(cfg, s.epsilons, labels, s.track_from, s.track_step)
    jobs = [(cfg.model, e, psi, s.cycles, s.samples_per_cycle, cfg.steps_per_period)
            for e, psi in zip(s.epsilons, states)]
    specs = _map(_spectrum_one, jobs, cfg.threads)
    return labels, specs


def cmd_spectrum(cfg: RunConfig, args) -> list[str]:
    s = cfg.spectrum
    labels, specs = _spectra(cfg)
    out = []
    for e, l, sp in zip(s.epsilons, labels, specs):
        extra = {"epsilon": e, "label": l, "track_from": s.track_from, "cycles": s.cycles,
                 "samples_per_cycle": s.samples_per_cycle, "fundamental_power": sp.normalization,
                 "interharmonic_max": sp.interharmonic_max(), "even_harmonic_max": sp.even_harmonic_max()}
        if args.band:
            k1, k2 = (int(v) for v in _pair(args.band))
            extra["band"] = [k1, k2]
            extra["band_power"] = spectra.band_power(sp, k1, k2)
        path = os.path.join(cfg.out, f"spectrum_eps{_tag(e)}_label{l}.csv")
        rows = zip(sp.harmonic.tolist(), sp.frequencies.tolist(), sp.power.tolist())
        write_csv(path, provenance(cfg, "spectrum", **extra), ["harmonic_index", "frequency", "power"], rows)
        out.append(path)
    return out


def cmd_specdiff(cfg: RunConfig, args) -> list[str]:
    s = cfg.spectrum
    if len(s.epsilons) < 2:
        raise UsageError("specdiff needs at least two epsilons; differences are taken against the first")
    labels, specs = _spectra(cfg)
    out = []
    ref = specs[0]
    for e, l, sp in zip(s.epsilons[1:], labels[1:], specs[1:]):
        delta = spectra.spectrum_diff(sp, ref)
        head = provenance(cfg, "specdiff", minuend={"epsilon": e, "label": l},
                          subtrahend={"epsilon": s.epsilons[0], "label": labels[0]},
                          cycles=s.cycles, samples_per_cycle=s.samples_per_cycle)
        path = os.path.join(cfg.out, f"specdiff_eps{_tag(e)}_label{l}_minus_eps{_tag(s.epsilons[0])}_label{labels[0]}.csv")
        write_csv(path, head, ["harmonic_index", "delta_power"], zip(ref.harmonic.tolist(), delta.tolist()))
        out.append(path)
    return out


def cmd_convert_units(cfg: RunConfig, args) -> list[str]:
    mass = args.mass if args.mass is not None else basis.constants.m_e
    a = args.half_width
    if args.to_physical:
        p = basis.scaled_to_physical(cfg.model.kappa, cfg.model.omega0, args.epsilon,
                                     well_half_width=a, particle_mass=mass)
        intensity = (p.field_amplitude / basis.constants.e) ** 2 * basis.constants.c * basis.constants.epsilon_0 / 2
        result = {"direction": "to_physical", "kappa": cfg.model.kappa, "omega0": cfg.model.omega0,
                  "epsilon": args.epsilon, "half_width_m": a, "mass_kg": mass,
                  "drive_angular_frequency_rad_s": p.drive_angular_frequency,
                  "wavelength_m": 2 * np.pi * basis.constants.c / p.drive_angular_frequency,
                  "field_force_N": p.field_amplitude, "intensity_W_cm2": intensity / 1e4}
    else:
        if args.wavelength is None or args.intensity is None:
            raise UsageError("convert-units needs --wavelength and --intensity (or --to-physical)")
        p = basis.PhysicalParams(
            well_half_width=a, particle_mass=mass,
            field_amplitude=basis.field_force_from_intensity(args.intensity * 1e4),
            drive_angular_frequency=basis.angular_frequency_from_wavelength(args.wavelength))
        kappa, omega0, eps = basis.physical_to_scaled(p, cfg.model.kappa)
        result = {"direction": "to_scaled", "half_width_m": a, "mass_kg": mass,
                  "wavelength_m": args.wavelength, "intensity_W_cm2": args.intensity,
                  "kappa": kappa, "omega0": omega0, "epsilon": eps}
    path = os.path.join(cfg.out, "units.json")
    atomic_write(path, json.dumps({**provenance(cfg, "convert-units"), **result}, indent=1, sort_keys=True) + "\n")
    print(json.dumps(result, sort_keys=True))
    return [path]


def verify_checks(cfg: RunConfig) -> list[dict]:
    """Fast invariant suite; each entry has name, value, limit, passed."""
    m = cfg.model
    checks = []

    def add(name, value, limit):
        checks.append({"name": name, "value": float(value), "limit": float(limit),
                       "passed": bool(value <= limit)})

    add("hamiltonian_hermitian", basis.hermitian_defect(basis.hamiltonian_at(m, 175.5, 0.013)), 1e-12)
    x, w = np.polynomial.legendre.leggauss(200)
    quad = max(abs(np.sum(w * np.sin(i * np.pi * (x + 1) / 2) * x * np.sin(j * np.pi * (x + 1) / 2))
                   - basis.dipole_element(i, j)) for i in range(1, 11) for j in range(1, 11))
    add("dipole_vs_quadrature", quad, 1e-10)
    for eps in (0.0, 175.5, 800.0):
        sol = floquet.solve(m, eps, cfg.steps_per_period)
        add(f"unitarity_eps{eps:g}", basis.unitarity_defect(sol.monodromy), 1e-8)
        add(f"residual_eps{eps:g}", sol.residuals().max(), 1e-7)
        add(f"orthonormality_eps{eps:g}", sol.gram_defect(), 1e-8)
        if eps == 0.0:
            E = np.array([basis.unperturbed_energy(n, m) for n in range(1, m.n_basis + 1)])
            ref = np.sort(floquet.fold(E, m.quasienergy_zone))
            add("free_limit", crossings.circle_gap(sol.quasienergies, ref, m.quasienergy_zone).max(), 1e-8)
    sol = floquet.solve(m, 175.5, cfg.steps_per_period)
    sp = spectra.radiation_spectrum(spectra.dipole_series(m, 175.5, sol.states[:, 0], n_cycles=16,
                                                          samples_per_cycle=64,
                                                          steps_per_period=cfg.steps_per_period))
    add("interharmonic_power", sp.interharmonic_max(), 1e-6)
    add("even_harmonic_power", sp.even_harmonic_max(), 1e-6)
    s0 = classical.PhasePoint(0.3, 2.0, 0.0)
    s1 = classical.evolve(s0, 100 * 2 * np.pi / m.omega0, 0.0, m.omega0)
    add("free_motion_energy", abs(s1.p ** 2 - s0.p ** 2), 1e-12)
    c = RunConfig()
    add("config_round_trip", 0.0 if RunConfig.loads(c.dumps()) == c else 1.0, 0.0)
    return checks


def cmd_verify(cfg: RunConfig, args) -> list[str]:
    checks = verify_checks(cfg)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (limit {c['limit']:.1e})")
    path = os.path.join(cfg.out, "verify.json")
    atomic_write(path, json.dumps({**provenance(cfg, "verify"), "checks": checks}, indent=1, sort_keys=True) + "\n")
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        raise ContractError(f"failed checks: {', '.join(failed)}")
    return [path]


COMMANDS = {
    "strobe": cmd_strobe,
    "scan": cmd_scan,
    "crossings": cmd_crossings,
    "husimi": cmd_husimi,
    "spectrum": cmd_spectrum,
    "specdiff": cmd_specdiff,
    "convert-units": cmd_convert_units,
    "verify": cmd_verify,
}


def _strobe_one(job):
    seed, periods, eps, omega0 = job
    return classical.strobe([seed], periods, eps, omega0)[0]


def _spectrum_one(job):
    model, eps, psi, cycles, spc, steps = job
    series = spectra.dipole_series(model, eps, psi, n_cycles=cycles, samples_per_cycle=spc,
                                   steps_per_period=steps)
    return spectra.radiation_spectrum(series)


def _map(fn, jobs, threads):
    """Run independent jobs, in worker processes when ``threads > 1``; order is kept."""
    if threads and threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [scan], ... sections")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker count for independent jobs")
    common.add_argument("--seed", type=int, help="seed for random classical ensembles")
    common.add_argument("--n-basis", type=int)
    common.add_argument("--omega0", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--steps-per-period", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="floquetwell", description="Floquet analysis of a driven square well.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("strobe", parents=[common], help="classical strobe (Poincare) samples")
    s.add_argument("--eps", help="comma-separated field strengths")
    s.add_argument("--periods", type=int)
    s.add_argument("--orbits", type=int, help="random orbits (0: fixed seed grid)")
    s.add_argument("--island", action="store_true", help="also locate the resonance island center")

    s = sub.add_parser("scan", parents=[common], help="quasienergy curves over a field range")
    s.add_argument("--eps", metavar="LO:HI:STEP")
    s.add_argument("--curves", type=int, help="keep curves with labels <= N")

    s = sub.add_parser("crossings", parents=[common], help="avoided-crossing report for a bracket")
    s.add_argument("--bracket", metavar="LO:HI")
    s.add_argument("--step", type=float)
    s.add_argument("--curves", type=int)
    s.add_argument("--labels", help="comma-separated curve labels to examine")
    s.add_argument("--gap-threshold", type=float)
    s.add_argument("--window", metavar="BEFORE:AFTER", help="classification points")

    for name, helptext in (("husimi", "Husimi grids of tracked states"),
                           ("spectrum", "radiation spectra of tracked states"),
                           ("specdiff", "spectrum differences against the first entry")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--eps", help="comma-separated field strengths")
        s.add_argument("--labels", "--label", dest="labels",
                       help="one curve label, or one per epsilon; labels are fixed at --track-from")
        s.add_argument("--track-from", type=float)
        s.add_argument("--track-step", type=float)
        if name == "husimi":
            s.add_argument("--sigma", type=float)
            s.add_argument("--grid", metavar="TxJ")
            s.add_argument("--jmax", type=float)
        else:
            s.add_argument("--cycles", type=int)
            s.add_argument("--samples-per-cycle", type=int)
        if name == "spectrum":
            s.add_argument("--band", metavar="K1:K2", help="report summed power of harmonics K1..K2")

    s = sub.add_parser("convert-units", parents=[common], help="lab units <-> scaled parameters")
    s.add_argument("--half-width", type=float, required=True, help="well half-width a (m)")
    s.add_argument("--mass", type=float, help="particle mass (kg); default free electron")
    s.add_argument("--wavelength", type=float, help="drive wavelength (m)")
    s.add_argument("--intensity", type=float, help="drive intensity (W/cm^2)")
    s.add_argument("--to-physical", action="store_true", help="map --omega0/--epsilon back to lab units")
    s.add_argument("--epsilon", type=float, default=0.0)

    sub.add_parser("verify", parents=[common], help="run the invariant checks")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    m = cfg.model
    if args.n_basis or args.omega0 or args.kappa:
        cfg.model = basis.WellConfig(kappa=args.kappa or m.kappa, omega0=args.omega0 or m.omega0,
                                     n_basis=args.n_basis or m.n_basis)
    if args.steps_per_period:
        cfg.steps_per_period = args.steps_per_period
    if cfg.steps_per_period < 4 or cfg.steps_per_period % 4:
        raise UsageError(f"steps_per_period must be a positive multiple of 4, got {cfg.steps_per_period}")
    if args.out:
        cfg.out = args.out
    if args.threads:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    c = args.command
    g = lambda name: getattr(args, name, None)  # noqa: E731
    if c == "strobe":
        if g("eps") is not None:
            cfg.strobe.epsilons = _floats(args.eps)
        if g("periods"):
            cfg.strobe.periods = args.periods
        if g("orbits") is not None:
            cfg.strobe.orbits = args.orbits
    elif c == "scan":
        if g("eps"):
            cfg.scan.lo, cfg.scan.hi, cfg.scan.step = _range(args.eps)
        if g("curves"):
            cfg.scan.curves = args.curves
    elif c == "crossings":
        cs = cfg.crossings
        if g("bracket"):
            cs.lo, cs.hi = _pair(args.bracket)
        if g("step"):
            cs.step = args.step
        if g("curves"):
            cs.curves = args.curves
        if g("labels"):
            cs.labels = _ints(args.labels)
        if g("gap_threshold"):
            cs.gap_threshold = args.gap_threshold
        if g("window"):
            cs.window = list(_pair(args.window))
    elif c in ("husimi", "spectrum", "specdiff"):
        sec = cfg.husimi if c == "husimi" else cfg.spectrum
        if g("eps"):
            sec.epsilons = _floats(args.eps)
        if g("track_from") is not None:
            sec.track_from = args.track_from
        if g("track_step"):
            sec.track_step = args.track_step
        if c == "husimi":
            if g("labels"):
                sec.labels = _ints(args.labels)
            if g("sigma"):
                sec.sigma = args.sigma
            if g("grid"):
                try:
                    sec.n_theta, sec.n_J = (int(v) for v in args.grid.lower().split("x"))
                except ValueError as exc:
                    raise UsageError(f"--grid expects TxJ, got {args.grid!r}") from exc
            if g("jmax"):
                sec.J_max = args.jmax
        else:
            if g("labels"):
                sec.labels = _ints(args.labels)
            if g("cycles"):
                sec.cycles = args.cycles
            if g("samples_per_cycle"):
                sec.samples_per_cycle = args.samples_per_cycle
    return cfg


def _error_record(out_dir, command, exc, code):
    rec = {"command": command, "error": type(exc).__name__, "message": str(exc),
           "exit_code": code, "version": __version__}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            atomic_write(os.path.join(out_dir, "error.json"), json.dumps(rec, indent=1, sort_keys=True) + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    out_dir = None
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        if command is None:
            raise UsageError("missing command; see --help")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        out_dir = cfg.out
        t0 = time.perf_counter()
        files = COMMANDS[command](cfg, args)
        logger.info("%s finished in %.1f s", command, time.perf_counter() - t0)
        for f in files:
            print(f)
        return EXIT_OK
    except UsageError as exc:
        return _error_record(out_dir, command, exc, EXIT_USAGE)
    except (ValueError, OSError) as exc:
        if out_dir is None:
            return _error_record(out_dir, command, exc, EXIT_USAGE)
        return _error_record(out_dir, command, exc, EXIT_NUMERICAL)
    except (ContractError, floquet.IntegrationError, crossings.BracketError,
            classical.WallHitError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _error_record(out_dir, command, exc, EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader
from tqdm import tqdm

from src.conf import messages
from src.conf.config import config
from src.entity.models import (Analysis, BoundaryCondition, BoundaryConfig, Configuration, Estimate,
                               MatrixTarget, NewmarkParams, SpectralReport, SplineBasis1D)
from src.repository import reports as repository_reports
from src.schemas.spectra import LedgerEntry, ReportRow, RunLedger
from src.schemas.sweep import SweepSpec
from src.services.assembly import assemble_collocation, assemble_stiffness
from src.services.exceptions import FitError, IgaSpectraError
from src.services.grid import build_grid
from src.services.spectra import analyze, fit_scaling, galerkin_bound
from src.services.splines import make_knot_vector

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"

BUNDLES = ("cond_vs_h", "cond_vs_p", "cond_vs_k", "eig_cloud", "spy")


def enumerate_configurations(spec: SweepSpec) -> list[Configuration]:
    """
    The enumerate_configurations function expands a sweep into its Cartesian product.

    Order is target, bc, dt, beta, p, selector, h. Mass configurations do not
    depend on bc, dt or beta and appear once per (p, k, h).

    :param spec: SweepSpec: Validated sweep
    :return: Configurations in output order
    """
    configurations = []
    for target in spec.target:
        if target is MatrixTarget.mass:
            axes = [(None, None, None)]
        else:
            axes = [(bc, dt, beta) for bc in spec.bc for dt in spec.dt for beta in spec.beta]
        for bc, dt, beta in axes:
            for p in spec.p:
                for selector, k in spec.regularities(p):
                    for h_den in spec.h_den:
                        configurations.append(Configuration(target=target, p=p, k=k, h_den=h_den, bc=bc, dt=dt,
                                                            beta=beta, gamma=spec.gamma, c0=spec.c0,
                                                            selector=selector))
    return configurations


def build_matrix(configuration: Configuration):
    """ Assemble D0 (mass) or the time-stepping matrix (stiffness) for one configuration. """
    basis = SplineBasis1D(make_knot_vector(configuration.p, configuration.h_den, configuration.k))
    grid = build_grid(basis, basis, BoundaryConfig.uniform(configuration.bc or BoundaryCondition.dirichlet))
    colloc = assemble_collocation(grid, basis, basis)
    if configuration.target is MatrixTarget.mass:
        return colloc.d0
    params = NewmarkParams(dt=configuration.dt, beta=configuration.beta, gamma=configuration.gamma,
                           c0=configuration.c0)
    return assemble_stiffness(colloc, grid, params, configuration.label).matrix


def run_configuration(configuration: Configuration, analyses: list[Analysis], out_dir: str,
                      max_dof: int | None = None) -> tuple[LedgerEntry, SpectralReport | None]:
    """
    The run_configuration function assembles, analyzes and dumps one configuration.

    Failures are caught and recorded on the returned entry.

    :param configuration: Configuration: Parameters to run
    :param analyses: list[Analysis]: Requested analyses
    :param out_dir: str: Directory receiving eigenvalue and matrix side files
    :param max_dof: int: Eigensolve cap override
    :return: The ledger entry and, on success, the full report
    """
    label = configuration.label
    started = time.perf_counter()
    try:
        matrix = build_matrix(configuration)
        assembly_ms = (time.perf_counter() - started) * 1000.0
        report = analyze(matrix, configuration, analyses, assembly_ms, max_dof)
        outputs = []
        if report.eigenvalues is not None:
            outputs.append(str(repository_reports.write_eigenvalues(Path(out_dir) / "eig" / f"{label}.csv",
                                                                    report.eigenvalues)))
        if report.eig_skipped or Analysis.spy in {Analysis(a) for a in analyses}:
            outputs.append(str(repository_reports.export_matrix(Path(out_dir) / "spy" / f"{label}.txt", matrix)))
    except IgaSpectraError as err:
        logger.error("%s failed: %s", label, err)
        error = str(err)
    except Exception as err:
        logger.exception("%s failed unexpectedly", label)
        error = f"{type(err).__name__}: {err}"
    else:
        error = None
    if error is not None:
        return LedgerEntry(label=label, selector=configuration.selector, status="failed", error=error,
                           assembly_ms=(time.perf_counter() - started) * 1000.0), None

    status = "skipped-too-large" if report.eig_skipped else "ok"
    logger.info("%s: %s, dof=%d, cond=%.6g, %.1f ms + %.1f ms", label, status, report.dof, report.cond_est,
                report.assembly_ms, report.analysis_ms)
    entry = LedgerEntry(label=label, selector=configuration.selector, status=status, outputs=outputs,
                        assembly_ms=report.assembly_ms, analysis_ms=report.analysis_ms,
                        row=ReportRow.from_report(report))
    return entry, report


def _run_entry(args) -> LedgerEntry:
    configuration, analyses, out_dir, max_dof = args
    return run_configuration(configuration, analyses, out_dir, max_dof)[0]


def worker_count(requested: int | None = None) -> int:
    return requested or config.IGA_SPECTRA_THREADS or os.cpu_count() or 1


def run_sweep(spec: SweepSpec, workers: int | None = None, progress: bool = True,
              max_dof: int | None = None) -> RunLedger:
    """
    The run_sweep function runs every configuration of the sweep and writes sweep.csv.

    Workers compute configurations independently; results are collected in
    sweep order, so the CSV does not depend on the pool size.

    :param spec: SweepSpec: Validated sweep
    :param workers: int: Pool size, IGA_SPECTRA_THREADS or the core count by default
    :param progress: bool: Show a progress bar
    :param max_dof: int: Eigensolve cap override
    :return: A RunLedger with one entry per configuration
    """
    configurations = enumerate_configurations(spec)
    jobs = [(c, list(spec.analyses), spec.out_dir, max_dof) for c in configurations]
    workers = min(worker_count(workers), max(len(jobs), 1))
    logger.info("Sweep of %d configurations on %d worker(s)", len(jobs), workers)

    if workers == 1:
        results = map(_run_entry, jobs)
        entries = list(tqdm(results, total=len(jobs), disable=not progress, desc="sweep"))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = executor.map(_run_entry, jobs)
            entries = list(tqdm(results, total=len(jobs), disable=not progress, desc="sweep"))

    ledger = RunLedger(entries=entries)
    csv_path = repository_reports.write_rows([row.model_dump() for row in ledger.rows()],
                                             Path(spec.out_dir) / "sweep.csv")
    ledger.csv_path = str(csv_path)
    repository_reports.write_summary(Path(spec.out_dir) / "ledger.json", ledger.model_dump_json(indent=2))
    if ledger.failed:
        logger.warning("%d of %d configurations failed", len(ledger.failed), len(entries))
    return ledger


@dataclass
class ReportBundle:
    summary: str = ""
    files: dict[str, str] = field(default_factory=dict)
    exponents: list[dict] = field(default_factory=list)


def _bound_estimate(target: str, selector: str, k: int, p: int) -> Estimate:
    maximal = selector == "max" or k == p - 1
    if target == MatrixTarget.mass.value:
        return Estimate.mass_kmax if maximal else Estimate.mass_k0
    return Estimate.stiffness_kmax if maximal else Estimate.stiffness_k0


def _grouped(frame: pd.DataFrame, keys: list[str], varying: str) -> list[tuple[tuple, pd.DataFrame]]:
    groups = []
    for key, group in frame.groupby(keys, dropna=False, sort=False):
        if group[varying].nunique() >= 2:
            groups.append((key, group.sort_values(varying)))
    return groups


def _exponent_rows(frame: pd.DataFrame, keys: list[str], mode: str) -> list[dict]:
    varying = "h_den" if mode == "h" else "p"
    rows = []
    for key, group in _grouped(frame, keys, varying):
        group = group.drop_duplicates(varying)
        if len(group) < 3:
            continue
        if mode == "h":
            series = list(zip(1.0 / group["h_den"], group["cond_est"]))
        else:
            series = list(zip(group["p"].astype(float), group["cond_est"]))
        first = group.iloc[0]
        estimate = _bound_estimate(first["target"], first["selector"], int(first["k"]), int(first["p"]))
        try:
            measured = fit_scaling(series, mode)
            bound_series = [(x, galerkin_bound(estimate, int(r.p), 1.0 / r.h_den).value)
                            for (x, _), r in zip(series, group.itertuples())]
            bound = fit_scaling(bound_series, mode)
        except FitError as err:
            logger.warning("fit skipped for %s: %s", dict(zip(keys, key)), err)
            continue
        row = dict(zip(keys, key))
        row.update(mode=mode, n_points=measured.n_points, exponent=measured.exponent,
                   r_squared=measured.r_squared, bound=estimate.value, bound_exponent=bound.exponent,
                   k_mismatch=bool(estimate in (Estimate.mass_k0, Estimate.stiffness_k0) and (group["k"] > 0).any()))
        rows.append(row)
    return rows


def emit_report(ledger: RunLedger, spec: SweepSpec, out_dir: str | None = None) -> ReportBundle:
    """
    The emit_report function groups the ledger rows into per-figure CSV bundles
    and renders a summary with fitted and bound exponents.

    :param ledger: RunLedger: Result of run_sweep
    :param spec: SweepSpec: The sweep that produced the ledger
    :param out_dir: str: Output directory, spec.out_dir by default
    :return: A ReportBundle with the summary text and written file paths
    """
    out_dir = Path(out_dir or spec.out_dir)
    entries = [e for e in ledger.entries if e.row is not None]
    if not entries:
        logger.warning(messages.EMPTY_LEDGER)
        return ReportBundle()

    frame = pd.DataFrame([dict(e.row.model_dump(), selector=e.selector, label=e.label,
                               outputs=";".join(e.outputs)) for e in entries])
    axes = ["target", "bc", "dt", "beta"]
    bundle = ReportBundle()
    tables = {
        "cond_vs_h": pd.concat([g for _, g in _grouped(frame, axes + ["p", "selector"], "h_den")] or [frame[:0]]),
        "cond_vs_p": pd.concat([g for _, g in _grouped(frame, axes + ["h_den", "selector"], "p")] or [frame[:0]]),
        "cond_vs_k": pd.concat([g for _, g in _grouped(frame, axes + ["p", "h_den"], "k")] or [frame[:0]]),
        "eig_cloud": frame[frame["eig_computed"]],
        "spy": frame[frame["outputs"].str.contains(f"{os.sep}spy{os.sep}", regex=False)],
    }
    for name in BUNDLES:
        table = tables[name]
        if len(table):
            bundle.files[name] = str(repository_reports.write_bundle(out_dir / f"bundle_{name}.csv", table))

    bundle.exponents = (_exponent_rows(frame, axes + ["p", "selector"], "h")
                        + _exponent_rows(frame, axes + ["h_den", "selector"], "p"))
    if bundle.exponents:
        bundle.files["exponents"] = str(repository_reports.write_bundle(out_dir / "exponents.csv",
                                                                        pd.DataFrame(bundle.exponents)))

    environment = Environment(loader=FileSystemLoader(TEMPLATES_DIR), keep_trailing_newline=True)
    statuses = pd.Series([e.status for e in ledger.entries]).value_counts().to_dict()
    bundle.summary = environment.get_template("summary.txt.j2").render(
        total=len(ledger.entries), statuses=statuses, failures=ledger.failed, files=bundle.files,
        exponents=bundle.exponents, spec=spec, isnan=lambda v: v is None or (isinstance(v, float) and np.isnan(v)))
    bundle.files["summary"] = str(repository_reports.write_summary(out_dir / "summary.txt", bundle.summary))
    return bundle

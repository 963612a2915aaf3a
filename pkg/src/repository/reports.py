import logging
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp

from src.conf.config import config

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["bc", "p", "k", "h_den", "dt", "beta", "gamma", "c0", "target", "dof", "nz", "cond_est",
                  "max_re", "min_re", "max_abs_im", "eig_computed", "assembly_ms", "analysis_ms"]

TRAJECTORY_COLUMNS = ["step", "t", "max_abs_u", "residual"]


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _to_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n",
                 encoding="utf-8")
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def write_rows(rows: list[dict], path: str | Path) -> Path:
    """
    The write_rows function writes the sweep report, one row per configuration,
    with the fixed column order.

    :param rows: list[dict]: Report rows keyed by column name
    :param path: str | Path: Target CSV file
    :return: The path written
    """
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    return _to_csv(frame, path)


def read_rows(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, keep_default_na=True)


def sort_eigenvalues(eigenvalues: np.ndarray) -> np.ndarray:
    """ Descending |lambda|, ties broken by descending real part. """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    order = np.lexsort((-eigenvalues.real, -np.abs(eigenvalues)))
    return eigenvalues[order]


def write_eigenvalues(path: str | Path, eigenvalues: np.ndarray) -> Path:
    """
    The write_eigenvalues function dumps the spectrum as (re, im) pairs.

    :param path: str | Path: Target CSV file
    :param eigenvalues: np.ndarray: Complex eigenvalues
    :return: The path written
    """
    ordered = sort_eigenvalues(eigenvalues)
    return _to_csv(pd.DataFrame({"re": ordered.real, "im": ordered.imag}), path)


def export_matrix(path: str | Path, matrix) -> Path:
    """
    The export_matrix function writes a sparse matrix as 1-based "row col value"
    triplets in row-major order.

    :param path: str | Path: Target text file
    :param matrix: Sparse or dense matrix
    :return: The path written
    """
    coo = sp.csr_matrix(matrix)
    coo.sort_indices()
    coo = coo.tocoo()
    path = _prepare(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row, col, value in zip(coo.row, coo.col, coo.data):
            fh.write(f"{row + 1} {col + 1} {value:.17g}\n")
    return path


def read_matrix(path: str | Path, shape: tuple[int, int]) -> sp.csr_matrix:
    """ Inverse of export_matrix. """
    table = np.loadtxt(path, ndmin=2)
    if table.size == 0:
        return sp.csr_matrix(shape)
    rows, cols, values = table[:, 0].astype(int) - 1, table[:, 1].astype(int) - 1, table[:, 2]
    return sp.csr_matrix((values, (rows, cols)), shape=shape)


def write_trajectory(path: str | Path, records: list[dict]) -> Path:
    return _to_csv(pd.DataFrame(records, columns=TRAJECTORY_COLUMNS), path)


def write_bundle(path: str | Path, frame: pd.DataFrame) -> Path:
    return _to_csv(frame, path)


def write_summary(path: str | Path, text: str) -> Path:
    path = _prepare(path)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path

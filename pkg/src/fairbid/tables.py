"""Versioned CSV files for solved parity and ratio tables.

Metadata sits in ``# key=value`` lines above the CSV header. Floats are
written with ``repr`` so a load reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv

import numpy as np

from fairbid.distributions import FEMALE, MALE
from fairbid.errors import ConfigError
from fairbid.parity import ParityValueTable
from fairbid.ratio import RatioValueTable

FORMAT = "fairbid-table v1"
THETAS = ("m", "w")


def dump_table(table, path) -> None:
    if isinstance(table, ParityValueTable):
        meta = {"kind": "parity", "K": table.K, "p": table.p}
        header = ("k", "theta", "V", "Phi")
        rows = (
            (k, THETAS[g], repr(float(table.V[k + table.K, g])), repr(float(table.Phi[k + table.K, g])))
            for k in range(-table.K, table.K + 1)
            for g in (MALE, FEMALE)
        )
    elif isinstance(table, RatioValueTable):
        meta = {"kind": "ratio", "r": table.r, "K": table.K, "p": table.p, "mu": table.mu, "n_w_max": table.n_w_max}
        header = ("n_m", "n_w", "theta", "V", "Phi")
        rows = (
            (a, b, THETAS[g], repr(float(table.V[a, b, g])), repr(float(table.Phi[a, b, g])))
            for a in range(table.mu + 1)
            for b in range(table.n_w_max + 1)
            for g in (MALE, FEMALE)
        )
    else:
        raise TypeError(f"cannot serialize {type(table).__name__}")
    meta.update(
        epsilon=table.epsilon,
        iterations=table.iterations,
        converged_delta=table.converged_delta,
        fingerprint=table.fingerprint,
    )
    with open(path, "w", newline="") as fh:
        fh.write(f"# {FORMAT}\n")
        for key, value in meta.items():
            fh.write(f"# {key}={value!r}\n" if isinstance(value, float) else f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _meta_value(text: str):
    if text == "None":
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_table(path):
    meta = {}
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {FORMAT}":
            raise ConfigError(f"{path}: not a {FORMAT} file")
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = _meta_value(value)
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        rows = list(csv.DictReader(fh))
    common = dict(
        converged_delta=float(meta["converged_delta"]),
        iterations=int(meta["iterations"]),
        epsilon=float(meta["epsilon"]),
        fingerprint=str(meta.get("fingerprint") or ""),
    )
    if meta.get("kind") == "parity":
        K = int(meta["K"])
        V = np.zeros((2 * K + 1, 2))
        Phi = np.zeros_like(V)
        for row in rows:
            i, g = int(row["k"]) + K, THETAS.index(row["theta"])
            V[i, g], Phi[i, g] = float(row["V"]), float(row["Phi"])
        p = meta.get("p")
        return ParityValueTable(K=K, V=V, Phi=Phi, p=None if p is None else float(p), **common)
    if meta.get("kind") == "ratio":
        mu, n_w_max = int(meta["mu"]), int(meta["n_w_max"])
        V = np.zeros((mu + 1, n_w_max + 1, 2))
        Phi = np.zeros_like(V)
        for row in rows:
            a, b, g = int(row["n_m"]), int(row["n_w"]), THETAS.index(row["theta"])
            V[a, b, g], Phi[a, b, g] = float(row["V"]), float(row["Phi"])
        return RatioValueTable(
            r=float(meta["r"]), K=float(meta["K"]), p=float(meta["p"]), mu=mu, n_w_max=n_w_max, V=V, Phi=Phi, **common
        )
    raise ConfigError(f"{path}: unknown table kind {meta.get('kind')!r}")

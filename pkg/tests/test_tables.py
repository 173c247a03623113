import numpy as np
import pytest

from conftest import table1_model
from fairbid import ParityValueTable, RatioValueTable, SolverConfig, solve_parity, solve_ratio
from fairbid.errors import ConfigError
from fairbid.tables import dump_table, load_table


def _same(a, b):
    np.testing.assert_array_equal(a.V, b.V)
    np.testing.assert_array_equal(a.Phi, b.Phi)
    assert (a.iterations, a.converged_delta, a.epsilon, a.fingerprint) == (
        b.iterations,
        b.converged_delta,
        b.epsilon,
        b.fingerprint,
    )


def test_parity_round_trip(tmp_path):
    table = solve_parity(table1_model("equal_price", delta=0.95), 4, SolverConfig(epsilon=1e-8))
    path = tmp_path / "parity.csv"
    dump_table(table, path)
    loaded = load_table(path)
    assert isinstance(loaded, ParityValueTable) and loaded.K == 4
    _same(table, loaded)


def test_ratio_round_trip(tmp_path):
    table = solve_ratio(table1_model("equal_price", p=0.3, delta=0.95), 0.8, 2, 6)
    path = tmp_path / "ratio.csv"
    dump_table(table, path)
    loaded = load_table(path)
    assert isinstance(loaded, RatioValueTable)
    assert (loaded.r, loaded.K, loaded.p, loaded.mu, loaded.n_w_max) == (0.8, 2, 0.3, 6, table.n_w_max)
    _same(table, loaded)
    assert loaded.bid(1, 2, 1) == table.bid(1, 2, 1)


def test_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("k,theta,V,Phi\n0,m,0,0\n")
    with pytest.raises(ConfigError):
        load_table(path)


def test_rejects_unknown_objects(tmp_path):
    with pytest.raises(TypeError):
        dump_table(object(), tmp_path / "x.csv")

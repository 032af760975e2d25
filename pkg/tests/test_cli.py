import io
import json

import pytest

from phylocsp.cli import main
from phylocsp.registry import Registry, builtin_payoff, load_registry
from phylocsp.errors import ArgumentError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_gap(capsys, tmp_path):
    out = tmp_path / "gap.txt"
    code, _, _ = run(capsys, "gen-gap", "--payoff", "triplet", "--k", "3", "--d", "2", "--out", str(out))
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0].startswith("vars ") and len(lines) == 31


def test_gen_gap_errors(capsys):
    assert run(capsys, "gen-gap", "--payoff", "triplet", "--k", "3", "--d", "9")[0] == 3
    code, _, err = run(capsys, "gen-gap", "--payoff", "bogus", "--d", "2")
    assert code == 2 and "bogus" in err
    assert run(capsys, "gen-gap", "--payoff", "triplet", "--k", "4", "--d", "2")[0] == 2


def test_gen_random_deterministic(capsys):
    a = run(capsys, "gen-random", "--n", "5", "--constraints", "8", "--payoff", "triplet", "--seed", "7")[1]
    b = run(capsys, "gen-random", "--n", "5", "--constraints", "8", "--payoff", "triplet", "--seed", "7")[1]
    c = run(capsys, "gen-random", "--n", "5", "--constraints", "8", "--payoff", "triplet", "--seed", "8")[1]
    assert a == b and a != c


def test_seed_from_env(capsys, monkeypatch):
    monkeypatch.setenv("PHYLOCSP_SEED", "7")
    a = run(capsys, "gen-random", "--n", "5", "--constraints", "8")[1]
    monkeypatch.delenv("PHYLOCSP_SEED")
    b = run(capsys, "gen-random", "--n", "5", "--constraints", "8", "--seed", "7")[1]
    assert a == b


@pytest.fixture
def conflict(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("vars a b c\n1/2 triplet a b c\n1/2 triplet a c b\n")
    return str(p)


def test_solve_brute(capsys, conflict):
    code, out, _ = run(capsys, "solve-brute", conflict)
    rep = json.loads(out)
    assert code == 0 and rep["value"] == 0.5 and rep["seed"] == 0 and "version" in rep


def test_solve_order_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("vars a b c\n1 triplet a b c\n"))
    code, out, _ = run(capsys, "solve-order", "-", "--order", "a,c,b")
    assert code == 0 and json.loads(out)["value"] == 0.0


def test_solve_random(capsys):
    code, out, _ = run(capsys, "solve-random", "--payoff", "triplet", "--trials", "100000")
    mean = json.loads(out)["mean"]
    assert code == 0 and 0.323 <= mean <= 0.343


def test_solve_random_instance(capsys, conflict):
    code, out, _ = run(capsys, "solve-random", conflict, "--trials", "2000")
    assert code == 0 and 0.25 < json.loads(out)["mean"] < 0.42


def test_alpha_search(capsys):
    code, out, _ = run(capsys, "alpha-search", "--payoff", "split-right-6", "--depth", "1", "--refine", "0")
    rep = json.loads(out)
    assert code == 0 and rep["alpha"] >= 0.8 and rep["skeleton"].endswith(";") and rep["leaf_probs"]


def test_reduce_and_build(capsys, conflict, tmp_path):
    out = tmp_path / "q.txt"
    code, _, err = run(capsys, "triplets-to-quartets", conflict, "--out", str(out))
    assert code == 0 and "gamma" in err
    assert "1/2 quartet a b c gamma" in out.read_text()
    code, out_, _ = run(capsys, "build", conflict)
    assert code == 1 and json.loads(out_)["consistent"] is False


def test_experiments(capsys):
    code, out, _ = run(capsys, "experiment", "gap-order", "--payoff", "triplet", "--k", "3", "--d", "1", "--all-orders")
    assert code == 0 and json.loads(out)["mean"] == pytest.approx(2 / 3, abs=1e-15)
    code, out, _ = run(capsys, "experiment", "divergence", "--k", "3", "--d", "4", "--q", "2",
                       "--labeling", "random", "--trials", "50")
    rep = json.loads(out)
    assert code == 0 and rep["all_within_bound"] and max(rep["values"].values()) <= 0.7072
    code, out, _ = run(capsys, "experiment", "coupling", "--M", "4", "--dprime", "3", "--trials", "20000")
    rep = json.loads(out)
    assert code == 0 and rep["chi2_pass"] and rep["min_cousin_rate"] >= rep["cousin_bound"]
    code, out, _ = run(capsys, "experiment", "monochrome", "--d", "2", "--orders", "5")
    rep = json.loads(out)
    assert code == 0 and len(rep["per_order_max_mc"]) == 5 and rep["m_star"] > 0


def test_reports_are_reproducible(capsys):
    a = run(capsys, "experiment", "coupling", "--trials", "5000", "--seed", "3")[1]
    b = run(capsys, "experiment", "coupling", "--trials", "5000", "--seed", "3")[1]
    assert a == b


def test_verify(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--filter", "coarse")
    assert code == 0 and out.count("PASS") == 1 and "coarse." in out
    bad = tmp_path / "bad.txt"
    bad.write_text("vars a b c\n1/2 triplet a b c\n1/3 triplet a c b\n")
    code, _, err = run(capsys, "verify", "--instance", str(bad), "--filter", "coarse")
    assert code == 2 and "sum" in err
    assert run(capsys, "verify", "--filter", "nothing-matches")[0] == 2


def test_registry_file(capsys, tmp_path):
    tab = tmp_path / "tables.txt"
    tab.write_text("payoff left2 2\n(x1,x2) 1\n")
    inst = tmp_path / "i.txt"
    inst.write_text("vars a b\n1 left2 b a\n")
    code, out, _ = run(capsys, "solve-brute", str(inst), "--registry", str(tab))
    assert code == 0 and json.loads(out)["tree"] == "(b,a);"


def test_registry_builtins():
    reg = Registry()
    assert "fstar:0.2" in reg and "nope" not in reg
    assert reg["fstar"].name == "fstar" and builtin_payoff("constant-3").default == 1.0
    with pytest.raises(ArgumentError):
        builtin_payoff("split-right-x")
    assert "x" in load_registry(text="payoff x 3\n((x1,x2),x3)\n")

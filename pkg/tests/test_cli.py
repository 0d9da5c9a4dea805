"""Command-line surface: literals, reports, formats, exit codes."""

import json
from fractions import Fraction

import pytest

from kummerlab.automorphic import (
    NormCharacter,
    character_of_order,
    dirichlet_characters,
    make_isobaric,
)
from kummerlab.cli import main, parse_alpha, parse_field
from kummerlab.cyclotomic import CycloField, Datum
from kummerlab.tower import KummerTower

QI = 4


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as e:  # argparse's own error path
        code = e.code
    return code, capsys.readouterr().out


def _rep(chars, field):
    return make_isobaric([(ch, 1) for ch in chars], Fraction(0), field)


@pytest.fixture(scope="module")
def pairs(tmp_path_factory):
    root = tmp_path_factory.mktemp("pairs")
    triv = NormCharacter.trivial(QI)
    chi = character_of_order(5, 4).retag(QI)
    delta = character_of_order(5, 2).retag(QI)
    chi8 = character_of_order(8, 2).retag(QI)
    d13 = character_of_order(13, 2).retag(QI)
    docs = {
        "equal": (_rep([triv, chi], QI), _rep([triv, chi], QI)),
        "twisted": (_rep([triv, chi], QI), _rep([delta, chi * delta], QI)),
        "small": (_rep([triv, chi8], QI), _rep([d13, chi8 * d13], QI)),
        "rational": (_rep([NormCharacter.trivial(1)], 1),
                     _rep([dirichlet_characters(4)[1]], 1)),
    }
    paths = {}
    for name, (a, b) in docs.items():
        path = root / f"{name}.json"
        path.write_text(json.dumps({"pi": a.to_json(), "pi2": b.to_json()}))
        paths[name] = str(path)
    return paths


# ---------------------------------------------------------------------------
# literals


@pytest.mark.parametrize("text,expected", [
    ("Q", 1),
    ("Q(i)", 4),
    ("Q(z8)", 8),
    ("12", 12),
])
def test_field_shorthands(text, expected):
    assert parse_field(text) == expected


def test_field_sqrt_shorthand():
    expected = KummerTower(1, 2, 1, Datum.of(3))
    assert parse_field("Q(sqrt 3)") == expected
    assert parse_field("Q(sqrt(3))") == expected
    assert parse_field("Q(sqrt -5)") == KummerTower(1, 2, 1, Datum.of(-5))


@pytest.mark.parametrize("text", ["Q(x)", "0", "Q(z0)", "Q(sqrt 1)",
                                  "Q(sqrt 0)", "F_7"])
def test_field_rejects(text):
    with pytest.raises(ValueError):
        parse_field(text)


def test_alpha_literals():
    F4 = CycloField(4)
    assert parse_alpha("1+z", 4) == Datum(F4.element([1, 1]))
    # constants take the canonical rational-datum form
    assert parse_alpha("3", 4) == Datum.of(3, m=4)
    assert parse_alpha("3/2", 1) == Datum.of(Fraction(3, 2))
    # powers fold through the conductor
    assert parse_alpha("z**5", 4) == Datum(F4.zeta())


@pytest.mark.parametrize("text", ["w+1", "1/z", "z+)", "sin(z)"])
def test_alpha_rejects(text):
    with pytest.raises(ValueError):
        parse_alpha(text, 4)


# ---------------------------------------------------------------------------
# frozen command examples


def test_lemma_44_example(capsys):
    code, out = run(["lemma", "44", "--m", "4", "--alpha", "1+z",
                     "--p", "2", "--r", "2", "--q", "3"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1
    assert doc["norms"] == [9, 81, 6561]
    assert doc["prime"] == {"q": 3, "f": 2}
    assert doc["unique_lift"] is True


def test_rs_tail_example(capsys):
    code, out = run(["rs", "tail", "--n", "2"], capsys)
    assert code == 0
    assert json.loads(out)["d0"] == 3
    _, out = run(["rs", "tail", "--n", "3"], capsys)
    assert json.loads(out)["d0"] == 6


def test_descent_plan_csv_exact(capsys):
    code, out = run(["descent", "plan", "--used", "2,5", "--p", "2",
                     "--r", "2", "--format", "csv"], capsys)
    assert code == 0
    assert out == "level,prime,power\n1,3,2\n2,7,4\n"


def test_split_trace_csv_exact(capsys):
    # 13 splits in the base; one prime above it climbs inert, one splits fully
    code, out = run(["split", "trace", "--m", "4", "--p", "2", "--r", "2",
                     "--alpha", "1+z", "--q", "13", "--format", "csv"], capsys)
    assert code == 0
    assert out == ("prime_index,base_degree,level,degree,count\n"
                   "0,1,0,1,1\n0,1,1,2,1\n0,1,2,4,1\n"
                   "1,1,0,1,1\n1,1,1,1,2\n1,1,2,1,4\n")


def test_split_density_report(capsys):
    code, out = run(["split", "density", "--m", "4", "--p", "2",
                     "--alpha", "1+z", "--X", "5000"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert (doc["degree1"], doc["total"], doc["ratio"]) == (660, 677,
                                                            "660/677")


def test_lemma_45_report(capsys):
    code, out = run(["lemma", "45", "--m", "4", "--p", "2", "--r", "2",
                     "--alpha", "1+z", "--q", "3", "--other", "1:4,2:2"],
                    capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["min_norm"] == 3 ** 8
    assert doc["folded"] == [[8, 8]]


def test_lemma_58_and_7split(capsys):
    code, out = run(["lemma", "58", "--D", "3", "--q", "7"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["label"] == 2 and doc["coords"] == [1, 1]
    code, out = run(["lemma", "7split", "--D", "3", "--q", "7"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["k_class"] == "DEGREEP"
    assert (doc["primes_in_top"], doc["relative_degree"]) == (2, 1)


def test_tower_verify_report(capsys):
    code, out = run(["tower", "verify", "--m", "4", "--p", "2", "--r", "2",
                     "--alpha", "1+z"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["chain_degrees"] == [1, 2, 4]
    assert doc["mu_source"] == "conductor"
    assert doc["witness_q"] == 3
    assert all(line["witness_q"] is not None for line in doc["lines"])


# ---------------------------------------------------------------------------
# series commands


def test_rs_coeffs_csv(pairs, capsys):
    code, out = run(["rs", "coeffs", "--pair", pairs["rational"],
                     "--X", "200", "--M", "20", "--kind", "Z",
                     "--exclude", "2", "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "index,real,imag"
    assert lines[1] == "3,4.0,0.0"
    assert all(float(line.split(",")[1]) >= 0 for line in lines[1:])


def test_rs_positivity_report(pairs, capsys):
    code, out = run(["rs", "positivity", "--pair", pairs["rational"],
                     "--X", "1000", "--M", "500", "--exclude", "2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["checked"] == 106
    assert doc["all_nonnegative"] is True


def test_rs_slope_report(pairs, capsys):
    code, out = run(["rs", "slope", "--pair", pairs["rational"],
                     "--X", "20000", "--exclude", "2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["grid"] == [0.1, 0.05, 0.02, 0.01]
    # mu + mu' = 2 for the completed pair
    assert abs(doc["completed_slope"] - 2) / 2 < 0.2
    assert len(doc["rows"]) == 4


# ---------------------------------------------------------------------------
# pipeline and descent


def test_theorem_a_equal(pairs, capsys):
    code, out = run(["theorem-a", "--K", "Q(i)", "--pair", pairs["equal"],
                     "--X", "2000"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["kind"] == "pipeline-report"
    assert doc["verdict"] == "EQUAL"
    assert doc["threads"] == 1
    assert [s["name"] for s in doc["stages"]][:2] == ["normalize", "reduce"]


def test_theorem_a_refuted(pairs, capsys):
    code, out = run(["theorem-a", "--K", "Q(i)", "--pair", pairs["twisted"],
                     "--X", "2000"], capsys)
    assert code == 2
    doc = json.loads(out)
    assert doc["verdict"] == "NOT-HYPOTHESIS"
    assert doc["stages"][-1]["certificate"]["witness"] == 13


def test_theorem_a_inconclusive(pairs, capsys):
    code, out = run(["theorem-a", "--K", "Q(i)", "--pair", pairs["small"],
                     "--X", "40", "--compare-X", "60"], capsys)
    assert code == 3
    assert json.loads(out)["verdict"] == "INCONCLUSIVE"


def test_descent_run_report(pairs, capsys):
    code, out = run(["descent", "run", "--K", "Q(i)",
                     "--pair", pairs["equal"]], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["conclusion"] == "equality descends to K"
    assert doc["fresh_primes"] == [3, 7]
    assert doc["replay_check"] is True


# ---------------------------------------------------------------------------
# exit codes and determinism


@pytest.mark.parametrize("argv", [
    ["nosuch"],
    ["tower"],
    ["split", "trace", "--m", "4", "--p", "2", "--q", "13"],
    ["rs", "tail", "--n", "0"],
    ["rs", "tail", "--n", "2", "--threads", "0"],
    ["tower", "build", "--m", "4", "--p", "2", "--alpha", "2",
     "--format", "csv"],
    ["theorem-a", "--K", "F_7", "--pair", "nowhere.json"],
    ["theorem-a", "--K", "Q(i)", "--pair", "nowhere.json"],
], ids=["unknown", "bare-group", "missing-alpha", "zero-n", "zero-threads",
        "csv-no-rows", "bad-field", "missing-pair"])
def test_invalid_parameters_exit_64(argv, capsys):
    code, _ = run(argv, capsys)
    assert code == 64


def test_bad_grid_exits_64(pairs, capsys):
    code, _ = run(["rs", "slope", "--pair", pairs["rational"],
                   "--X", "5000", "--exclude", "2",
                   "--grid", "0.01,0.05"], capsys)
    assert code == 64


def test_malformed_pair_exits_64(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _ = run(["descent", "run", "--K", "Q(i)", "--pair", str(bad)],
                  capsys)
    assert code == 64
    half = tmp_path / "half.json"
    half.write_text(json.dumps({"pi": {"field": 4, "components": [],
                                       "t": "0"}}))
    code, _ = run(["descent", "run", "--K", "Q(i)", "--pair", str(half)],
                  capsys)
    assert code == 64


def test_tower_verify_inconclusive_exits_3(capsys):
    code, _ = run(["tower", "verify", "--m", "4", "--p", "2", "--r", "2",
                   "--alpha", "1+z", "--bound", "2"], capsys)
    assert code == 3


def test_threads_env(pairs, capsys, monkeypatch):
    monkeypatch.setenv("KUMMERLAB_THREADS", "4")
    code, out = run(["rs", "tail", "--n", "2"], capsys)
    assert code == 0 and json.loads(out)["threads"] == 4
    # the flag wins over the environment
    code, out = run(["rs", "tail", "--n", "2", "--threads", "2"], capsys)
    assert code == 0 and json.loads(out)["threads"] == 2
    monkeypatch.setenv("KUMMERLAB_THREADS", "zero")
    code, _ = run(["rs", "tail", "--n", "2"], capsys)
    assert code == 64


def test_out_file_quiet_stdout(tmp_path, capsys):
    target = tmp_path / "tail.json"
    code, out = run(["rs", "tail", "--n", "2", "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["d0"] == 3


def test_reports_byte_identical(pairs, tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["theorem-a", "--K", "Q(i)", "--pair", pairs["equal"],
         "--X", "2000", "--out", str(a)], capsys)
    monkeypatch.setenv("KUMMERLAB_THREADS", "1")
    run(["theorem-a", "--K", "Q(i)", "--pair", pairs["equal"],
         "--X", "2000", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()
    _, first = run(["rs", "coeffs", "--pair", pairs["rational"],
                    "--X", "500", "--M", "50", "--exclude", "2",
                    "--format", "csv"], capsys)
    _, second = run(["rs", "coeffs", "--pair", pairs["rational"],
                     "--X", "500", "--M", "50", "--exclude", "2",
                     "--format", "csv"], capsys)
    assert first == second

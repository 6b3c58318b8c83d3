import json
from importlib import resources

import jsonschema
import pytest

from confrepair import __version__
from confrepair.cli import EXIT_ERROR, EXIT_INCOMPLETE, EXIT_OK, main
from confrepair.fixtures import figure2_fixture, git_diff


def schema(name):
    return json.loads(resources.files("confrepair").joinpath("schemas", name).read_text())


@pytest.fixture
def fig2_dir(tmp_path):
    return figure2_fixture().write(tmp_path / "fig2")


def repair(d, out, *extra):
    return main(["repair", "--tree", str(d / "tree"), "--config", str(d / "input.config"), "--patch", str(d / "patch.diff"), "--out", str(out), *extra])


def test_repair_writes_configs_and_valid_report(fig2_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert repair(fig2_dir, out) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, schema("repair_report.schema.json"))
    assert json.loads(capsys.readouterr().out) == report
    assert report["tool_version"] == __version__
    assert report["pairs_uncoverable"] == 0 and len(report["configs"]) == 2
    assert sorted(p.name for p in out.iterdir()) == ["repaired-1.config", "repaired-2.config", "report.json"]
    manifest = json.loads((fig2_dir / "manifest.json").read_text())
    expected = [c["covered_pairs"] for c in manifest["expected_report"]["configs"]]
    assert [c["covered_pairs"] for c in report["configs"]] == expected


def test_repair_then_coverage_is_complete(fig2_dir, tmp_path, capsys):
    out = tmp_path / "out"
    repair(fig2_dir, out)
    capsys.readouterr()
    args = ["coverage", "--tree", str(fig2_dir / "tree"), "--patch", str(fig2_dir / "patch.diff")]
    configs = sorted(out.glob("repaired-*.config"))
    code = main(args + [x for c in configs for x in ("--config", str(c))])
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, schema("coverage_report.schema.json"))
    assert code == EXIT_OK and doc["ratio"] == 1.0
    assert len(doc["configs"]) == 2 and all(c["ratio"] < 1.0 for c in doc["configs"])
    assert main(args + ["--config", str(fig2_dir / "input.config")]) == EXIT_INCOMPLETE
    assert json.loads(capsys.readouterr().out)["ratio"] == 0.0


def test_coverage_text_and_out_file(fig2_dir, tmp_path, capsys):
    target = tmp_path / "cov" / "report.txt"
    code = main(["coverage", "--tree", str(fig2_dir / "tree"), "--patch", str(fig2_dir / "patch.diff"), "--config", str(fig2_dir / "input.config"), "--format", "text", "--out", str(target)])
    assert code == EXIT_INCOMPLETE
    assert capsys.readouterr().out == ""
    assert target.read_text().startswith("total_lines: ")


def test_repair_text_format(fig2_dir, tmp_path, capsys):
    assert repair(fig2_dir, tmp_path / "o", "--format", "text") == EXIT_OK
    assert capsys.readouterr().out.startswith("pairs: ")


def test_repair_into_existing_directory(fig2_dir, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    assert repair(fig2_dir, out, "--dump-dimacs") == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["group-1.cnf", "group-2.cnf", "keep.txt", "repaired-1.config", "repaired-2.config", "report.json"]
    assert "p cnf" in (out / "group-1.cnf").read_text()
    assert not list(tmp_path.glob(".confrepair-*"))


def test_disable_optimizations_gives_same_configs(fig2_dir, tmp_path, capsys):
    repair(fig2_dir, tmp_path / "a")
    repair(fig2_dir, tmp_path / "b", "--disable-optimizations")
    for name in ("repaired-1.config", "repaired-2.config"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solver_budget_is_an_error(fig2_dir, tmp_path, capsys):
    out = tmp_path / "out"
    assert repair(fig2_dir, out, "--max-solver-calls", "0") == EXIT_ERROR
    assert not out.exists()
    assert "budget" in capsys.readouterr().err


def test_header_only_patch(fig2_dir, tmp_path, capsys):
    tree = fig2_dir / "tree"
    (tree / "include").mkdir()
    (tree / "include" / "gic.h").write_text("#define GIC 2\n")
    patch = tmp_path / "h.diff"
    patch.write_text(git_diff({"include/gic.h": "#define GIC 1\n"}, {"include/gic.h": "#define GIC 2\n"}))
    out = tmp_path / "out"
    code = main(["repair", "--tree", str(tree), "--config", str(fig2_dir / "input.config"), "--patch", str(patch), "--out", str(out)])
    report = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert report["pairs_total"] == 0 and report["configs"] == []
    assert report["unsupported"] == [{"file": "include/gic.h", "reason": "header-only"}]


def test_empty_patch(fig2_dir, tmp_path, capsys):
    patch = tmp_path / "empty.diff"
    patch.write_text("")
    code = main(["coverage", "--tree", str(fig2_dir / "tree"), "--patch", str(patch), "--config", str(fig2_dir / "input.config")])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK and doc["empty_patch"] and doc["ratio"] == 1.0


@pytest.mark.parametrize(
    "argv",
    [
        ["repair", "--tree", "/nonexistent", "--config", "x", "--patch", "y", "--out", "{out}"],
        ["repair", "--tree", "{tree}", "--config", "/nonexistent", "--patch", "{patch}", "--out", "{out}"],
        ["repair", "--tree", "{tree}", "--config", "{config}", "--patch", "/nonexistent", "--out", "{out}"],
        ["repair", "--tree", "{tree}", "--kconfig", "Nope", "--config", "{config}", "--patch", "{patch}", "--out", "{out}"],
        ["repair", "--tree", "{tree}", "--config", "{config}", "--config", "{config}", "--patch", "{patch}", "--out", "{out}"],
        ["repair", "--tree", "{tree}"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_2_without_output(fig2_dir, tmp_path, capsys, argv):
    out = tmp_path / "out"
    subs = {"{tree}": str(fig2_dir / "tree"), "{config}": str(fig2_dir / "input.config"), "{patch}": str(fig2_dir / "patch.diff"), "{out}": str(out)}
    assert main([subs.get(a, a) for a in argv]) == EXIT_ERROR
    assert not out.exists()
    assert capsys.readouterr().out == ""


def test_broken_kconfig_exits_2(fig2_dir, tmp_path, capsys):
    (fig2_dir / "tree" / "Kconfig").write_text("config A\n frobnicate\n")
    out = tmp_path / "out"
    assert repair(fig2_dir, out) == EXIT_ERROR
    assert "frobnicate" in capsys.readouterr().err
    assert not out.exists()


def test_constraints_command(fig2_dir, capsys):
    tree = str(fig2_dir / "tree")
    lines = figure2_fixture().files["drivers/irqchip/irq-gic.c"].splitlines()
    ifdef = next(i for i, l in enumerate(lines, 1) if l.startswith("#ifdef CONFIG_GIC_NON_BANKED"))
    assert main(["constraints", "--tree", tree, "--file", "drivers/irqchip/irq-gic.c", "--line", str(ifdef + 1)]) == EXIT_OK
    assert capsys.readouterr().out == "ARM_GIC && GIC_NON_BANKED\n"
    assert main(["constraints", "--tree", tree, "--file", "drivers/irqchip/irq-gic.c", "--line", "1"]) == EXIT_OK
    assert capsys.readouterr().out == "ARM_GIC\n"
    assert main(["constraints", "--tree", tree, "--file", "drivers/irqchip/irq-gic.c", "--line", "0"]) == EXIT_ERROR


def test_constraints_of_dead_code(tmp_path, capsys):
    tree = tmp_path / "t"
    tree.mkdir()
    (tree / "Kconfig").write_text('config A\n bool "a"\n')
    (tree / "Makefile").write_text("obj-y += f.o\n")
    (tree / "f.c").write_text("#if 0\nx;\n#endif\n")
    assert main(["constraints", "--tree", str(tree), "--file", "f.c", "--line", "2"]) == EXIT_OK
    assert capsys.readouterr().out == "false\n"


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out

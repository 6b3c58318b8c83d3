import pytest

from confrepair.fixtures import built_units, figure2_fixture, generate_random_fixture
from confrepair.kbuild import ALWAYS, MODULE, OPTION, BuildRule, KbuildError, KbuildModel, file_presence, parse_kbuild_text
from confrepair.kconfig import parse_kconfig, value_env
from confrepair.logic import FALSE, Var, conj, disj, evaluate
from confrepair.tree import Tree


def test_rule_kinds():
    rules = parse_kbuild_text("obj-y += a.o sub/\nobj-m += b.o\nobj-$(CONFIG_X) += c.o\nfoo-objs := x.o\nfoo-$(CONFIG_Y) += w.o\n")
    assert rules == [
        BuildRule("a.o", ALWAYS),
        BuildRule("sub/", ALWAYS),
        BuildRule("b.o", MODULE),
        BuildRule("c.o", OPTION, "X"),
        BuildRule("x.o", ALWAYS, None, "foo.o"),
        BuildRule("w.o", OPTION, "Y", "foo.o"),
    ]
    assert [r.line for r in rules] == [1, 1, 2, 3, 4, 5]


def test_continuations_and_comments():
    rules = parse_kbuild_text("# top\nobj-y += a.o \\\n\tb.o # trailing\n\n")
    assert [r.target for r in rules] == ["a.o", "b.o"]
    assert all(r.line == 2 for r in rules)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("ifeq ($(CONFIG_X),y)\n", "unsupported make construct"),
        ("ccflags-y := -O2\n", "unsupported target"),
        ("obj-y += $(FOO)\n", "variable expansion"),
        ("obj-y += a.c\n", "unsupported target"),
        ("foo-objs := sub/\n", "lists a directory"),
        ("obj-objs := a.o\n", "not a valid list"),
        ("obj-y += ../../a.o\n", "escapes the tree"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(KbuildError, match=fragment):
        parse_kbuild_text(text, "dir/Makefile")


def test_error_names_file_and_line():
    with pytest.raises(KbuildError, match=r"^dir/Makefile:2:"):
        parse_kbuild_text("obj-y += a.o\nbogus\n", "dir/Makefile")


def _model(files):
    return KbuildModel(Tree.from_files(files))


def test_directory_chain():
    m = _model({"Makefile": "obj-$(CONFIG_A) += d/\n", "d/Makefile": "obj-$(CONFIG_B) += f.o\n"})
    assert m.file_pc("d/f.c") == conj(Var("A"), Var("B"))
    assert m.makefiles_for("d/f.c") == ["Makefile", "d/Makefile"]


def test_nested_path_from_ancestor():
    # a rule two levels up can name the object directly
    m = _model({"Makefile": "obj-$(CONFIG_A) += d/e/f.o\n"})
    assert m.file_pc("d/e/f.c") == Var("A")


def test_several_rules_disjoin():
    m = _model({"Makefile": "obj-$(CONFIG_A) += f.o\nobj-$(CONFIG_B) += f.o\n"})
    assert m.file_pc("f.c") == disj(Var("A"), Var("B"))


def test_module_list():
    m = _model({"Makefile": "obj-m += f.o\n"})
    assert m.file_pc("f.c") == Var("MODULES")


def test_composite_object():
    m = _model({"Makefile": "obj-$(CONFIG_A) += drv.o\ndrv-objs := core.o\ndrv-$(CONFIG_B) += extra.o\n"})
    assert m.file_pc("core.c") == Var("A")
    assert m.file_pc("extra.c") == conj(Var("B"), Var("A"))
    # the composite itself has no source file
    assert m.file_pc("drv.c") == FALSE


def test_composite_cycle():
    m = _model({"Makefile": "obj-y += a.o\na-objs := b.o\nb-objs := a.o\n"})
    with pytest.raises(KbuildError, match="cycle"):
        m.object_pc("b.o")


def test_unreferenced_file_is_false():
    m = _model({"Makefile": "obj-y += a.o\n", "b.c": ""})
    assert m.file_pc("b.c") == FALSE
    assert m.unreferenced == {"b.c"}


def test_no_makefile_at_all():
    assert _model({"a.c": ""}).file_pc("a.c") == FALSE


def test_non_unit_rejected():
    with pytest.raises(KbuildError):
        _model({"Makefile": ""}).file_pc("a.h")


def test_kbuild_preferred_over_makefile():
    m = _model({"Kbuild": "obj-$(CONFIG_K) += a.o\n", "Makefile": "obj-$(CONFIG_M) += a.o\n"})
    assert m.file_pc("a.c") == Var("K")


def test_figure_tree():
    fx = figure2_fixture()
    tree = fx.tree()
    spec = parse_kconfig(fx.kconfig_root, tree.read_text)
    assert file_presence(tree, "drivers/irqchip/irq-gic.c", spec) == Var("ARM_GIC")


def test_undeclared_options_are_false():
    files = {"Kconfig": 'config A\n bool "a"\n', "Makefile": "obj-$(CONFIG_A) += a.o\nobj-$(CONFIG_GONE) += a.o b.o\n"}
    tree = Tree.from_files(files)
    spec = parse_kconfig("Kconfig", tree.read_text)
    assert file_presence(tree, "a.c", spec) == Var("A")
    assert file_presence(tree, "b.c", spec) == FALSE
    assert file_presence(tree, "b.c") == Var("GONE")


def test_presence_matches_build_simulation():
    """Presence conditions agree with a direct walk of the Makefiles on every assignment."""
    checked = 0
    for seed in range(500):
        fx = generate_random_fixture(seed)
        tree = fx.tree()
        spec = parse_kconfig(fx.kconfig_root, tree.read_text)
        units = sorted(p for p in fx.files if p.endswith(".c"))
        pcs = {u: file_presence(tree, u, spec) for u in units}
        for values in fx.assignments():
            built = built_units(fx.files, values)
            env = value_env(spec, values)
            for u in units:
                assert evaluate(pcs[u], env) == (u in built), (seed, u, values)
                checked += 1
    assert checked > 1000


def test_module_list_of_a_composite_needs_modules():
    m = _model({"Makefile": "obj-y += drv.o\ndrv-m += part.o\n"})
    assert m.file_pc("part.c") == Var("MODULES")
    assert built_units({"Makefile": "obj-y += drv.o\ndrv-m += part.o\n"}, {"MODULES": "n"}) == set()
    assert built_units({"Makefile": "obj-y += drv.o\ndrv-m += part.o\n"}, {"MODULES": "y"}) == {"part.c"}

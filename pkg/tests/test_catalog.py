import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseorder.catalog import (CatalogError, Origin, PassCatalog, PassId, PassSequence,
                                load_catalog, parse_catalog, render_sequence)


def test_bundled_catalog():
    cat = load_catalog()
    assert len(cat) == 140
    assert cat.source_label == "LLVM 3.7.1 opt"
    assert cat[0].name == "-aa-eval"
    assert all(n.startswith("-") for n in cat.names)
    assert len(set(cat.names)) == len(cat)
    for expanded in ("-loop-instsimplify", "-partially-inline-libcalls", "-separate-const-offset-from-gep"):
        assert expanded in cat


def test_parse_skips_comments_and_blanks():
    cat = parse_catalog("# header\n\n-a\n  -b  \n# c\n", "t")
    assert cat.names == ["-a", "-b"]
    assert cat.lookup("-b") == PassId(1, "-b")


@pytest.mark.parametrize("names", [[], ["-a", "-a"], ["a"], ["-"]])
def test_invalid_catalogs(names):
    with pytest.raises(CatalogError):
        PassCatalog.from_names(names)


def test_wrong_index_rejected():
    with pytest.raises(CatalogError):
        PassCatalog((PassId(1, "-a"),))


def test_load_missing_file(tmp_path):
    with pytest.raises(CatalogError):
        load_catalog(tmp_path / "nope.txt")


def test_lookup_and_validate():
    cat = PassCatalog.from_names(["-a", "-b", "-c"])
    seq = cat.sequence(["-c", "-a", "-c"], Origin.MANUAL)
    assert render_sequence(seq) == ["-c", "-a", "-c"]
    cat.validate(seq)
    with pytest.raises(CatalogError):
        cat.lookup("-z")
    other = PassCatalog.from_names(["-c", "-a"])
    with pytest.raises(CatalogError):
        other.validate(seq)


def test_empty_sequence_renders_empty():
    assert render_sequence(PassSequence()) == []


@given(st.lists(st.integers(0, 9), max_size=40))
def test_indices_round_trip(idx):
    cat = PassCatalog.from_names([f"-p{i}" for i in range(10)])
    seq = cat.from_indices(idx, Origin.RANDOM)
    assert [p.index for p in seq] == idx
    assert cat.sequence(render_sequence(seq)).items == seq.items

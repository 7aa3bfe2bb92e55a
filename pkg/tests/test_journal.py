from phaseorder.journal import Journal, record_key

from _records import CAT, make_record


def test_record_key():
    a = record_key(phase="model", kernel="k", index=1)
    assert a == record_key(index=1, kernel="k", phase="model")
    assert a != record_key(phase="model", kernel="k", index=2)
    assert len(a) == 32


def test_put_load_and_index(tmp_path):
    j = Journal(tmp_path / "j")
    assert not j.exists()
    j.init()
    recs = [make_record(i, float(i + 1)) for i in range(3)]
    for r in recs:
        j.put(r)
    assert j.has(recs[0].key)
    assert j.load(recs[1].key, CAT).to_dict() == recs[1].to_dict()
    assert j.load("missing", CAT) is None
    assert [e["key"] for e in j.index()] == [r.key for r in recs]


def test_torn_line_and_duplicates(tmp_path):
    j = Journal(tmp_path)
    j.init()
    r = make_record(0, 1.0)
    j.put(r)
    j.put(r)
    with open(j.index_path, "a") as f:
        f.write('{"key": "trunc')
    assert len(j.index()) == 2
    assert [x.key for x in j.records(CAT)] == [r.key]
    assert list(j.records(CAT, phase="baseline")) == []


def test_json_state(tmp_path):
    j = Journal(tmp_path)
    j.write_json("state/x.json", {"a": [1, 2]})
    assert j.read_json("state/x.json") == {"a": [1, 2]}
    assert j.read_json("state/none.json") is None
    assert not list(tmp_path.rglob("*.tmp"))


def test_repair_after_interruption(tmp_path):
    j = Journal(tmp_path)
    j.init()
    a, b = make_record(0, 1.0), make_record(1, 2.0)
    j.put(a)
    # b's file landed but the process died mid-append of its index line
    (j.root / "records" / f"{b.key}.json").write_text(
        j.record_path(a.key).read_text().replace(a.key, b.key))
    with open(j.index_path, "a") as f:
        f.write('{"key": "' + b.key[:5])
    (j.root / "records" / "junk.json.tmp").write_text("{")
    assert j.repair() == 1
    assert [e["key"] for e in j.index()] == [a.key, b.key]
    assert j.index_path.read_text().endswith("\n")
    assert not list((j.root / "records").glob("*.tmp"))
    assert j.repair() == 0

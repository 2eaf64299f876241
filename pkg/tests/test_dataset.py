"""Parsing, loading, serialization round-trips and the fetcher."""

import gzip
import hashlib
import http.server
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nidsbench.dataset import (
    Attribute,
    AttributeSchema,
    DataError,
    IntegrityError,
    ParseError,
    dataset_from_instances,
    fetch_dataset,
    kdd99_schema,
    load_dataset,
    parse_kdd_line,
    sha256_file,
    write_dataset,
)

from conftest import build_dataset, kdd_file, kdd_line


def test_kdd_schema_shape():
    schema = kdd99_schema()
    assert schema.n_attributes == 41
    assert len(schema.nominal_positions) == 7
    assert schema.attributes[0].name == "duration"
    assert schema.attributes[1].name == "protocol_type"


def test_parse_line_field_by_field():
    schema = kdd99_schema()
    rng = np.random.default_rng(3)
    line = kdd_line("normal", rng)
    inst = parse_kdd_line(line, schema)
    fields = line.split(",")
    assert inst.label == "normal"
    for pos, attr in enumerate(schema.attributes):
        if attr.kind == "numeric":
            assert inst.values[pos] == float(fields[pos])
        else:
            assert inst.values[pos] == fields[pos]


def test_parse_strips_single_trailing_dot():
    schema = kdd99_schema()
    line = kdd_line("smurf", np.random.default_rng(0))
    assert parse_kdd_line(line, schema).label == "smurf"
    # only one dot is stripped, nothing else is normalized
    assert parse_kdd_line(line + ".", schema).label == "smurf."


def test_parse_wrong_field_count():
    schema = kdd99_schema()
    line = ",".join(kdd_line("normal", np.random.default_rng(0)).split(",")[:-1])
    with pytest.raises(ParseError, match="expected 42 fields"):
        parse_kdd_line(line, schema, line_no=7)


def test_parse_bad_numeric_field_reports_position():
    schema = kdd99_schema()
    fields = kdd_line("normal", np.random.default_rng(0)).split(",")
    fields[0] = "zzz"
    with pytest.raises(ParseError, match=r"line 3.*field 1.*zzz"):
        parse_kdd_line(",".join(fields), schema, line_no=3)


def test_parse_rejects_non_finite_and_empty():
    schema = kdd99_schema()
    fields = kdd_line("normal", np.random.default_rng(0)).split(",")
    fields[0] = "nan"
    with pytest.raises(ParseError, match="non-finite"):
        parse_kdd_line(",".join(fields), schema)
    fields[0] = ""
    with pytest.raises(ParseError):
        parse_kdd_line(",".join(fields), schema)
    fields[0] = "0"
    fields[2] = ""  # nominal service
    with pytest.raises(ParseError, match="empty value"):
        parse_kdd_line(",".join(fields), schema)
    fields[2] = "http"
    fields[-1] = "."
    with pytest.raises(ParseError, match="empty class label"):
        parse_kdd_line(",".join(fields), schema)


def test_load_dataset_counts_and_order(tmp_path):
    labels = ["normal", "smurf", "neptune", "normal", "smurf"]
    path = kdd_file(tmp_path / "mini.csv", labels)
    ds = load_dataset(path)
    assert len(ds) == 5
    assert ds.class_counts() == {"normal": 2, "smurf": 2, "neptune": 1}
    assert [ds.instance(i).label for i in range(5)] == labels


def test_load_dataset_skips_blank_lines(tmp_path):
    path = tmp_path / "mini.csv"
    rng = np.random.default_rng(0)
    path.write_text(kdd_line("normal", rng) + "\n\n  \n"
                    + kdd_line("smurf", rng) + "\n")
    assert len(load_dataset(path)) == 2


def test_load_dataset_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DataError, match="no instances"):
        load_dataset(path)


def test_load_dataset_aborts_with_line_context(tmp_path):
    path = tmp_path / "bad.csv"
    rng = np.random.default_rng(0)
    good = kdd_line("normal", rng)
    bad = good.replace(good.split(",")[0], "oops", 1)
    path.write_text(good + "\n" + bad + "\n")
    with pytest.raises(ParseError, match="line 2"):
        load_dataset(path)


def test_load_dataset_accepts_gzip(tmp_path):
    rng = np.random.default_rng(1)
    raw = "\n".join(kdd_line("normal", rng) for _ in range(3)) + "\n"
    path = tmp_path / "mini.gz"
    path.write_bytes(gzip.compress(raw.encode()))
    assert len(load_dataset(path)) == 3


def test_load_dataset_drops_nsl_difficulty_column(tmp_path):
    rng = np.random.default_rng(1)
    lines = [kdd_line("normal", rng, dotted=False) + ",21",
             kdd_line("neptune", rng, dotted=False) + ",0"]
    path = tmp_path / "nsl.txt"
    path.write_text("\n".join(lines) + "\n")
    ds = load_dataset(path)
    assert len(ds) == 2
    assert ds.schema.n_attributes == 41
    assert set(ds.class_counts()) == {"normal", "neptune"}


def test_nominal_domains_accumulate_first_seen(tmp_path):
    path = kdd_file(tmp_path / "mini.csv", ["normal"] * 6, seed=5)
    ds = load_dataset(path)
    proto = ds.schema.attributes[1]
    first = ds.instance(0).values[1]
    assert proto.domain[0] == first


def test_deterministic_parse(tmp_path):
    path = kdd_file(tmp_path / "mini.csv", ["normal", "smurf"] * 10, seed=9)
    a = load_dataset(path)
    b = load_dataset(path)
    assert a.equals(b)


def test_round_trip_serialization(tmp_path):
    path = kdd_file(tmp_path / "mini.csv", ["normal", "smurf", "back"] * 4)
    ds = load_dataset(path)
    out = tmp_path / "roundtrip.csv"
    write_dataset(ds, out)
    again = load_dataset(out)
    assert ds.equals(again)


@settings(max_examples=30)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.sampled_from("pqr"),
                          st.sampled_from("ab")), min_size=1, max_size=40))
def test_round_trip_property(tmp_path_factory, rows):
    ds = build_dataset([("x", "numeric"), ("sym", "nominal")],
                       [(v, s) for v, s, _ in rows],
                       [lab for _, _, lab in rows])
    path = tmp_path_factory.mktemp("rt") / "data.csv"
    write_dataset(ds, path)
    fresh = AttributeSchema(tuple(Attribute(a.name, a.kind)
                                  for a in ds.schema.attributes))
    again = load_dataset(path, fresh)
    assert ds.equals(again)


def test_instance_invariant_checks():
    ds = build_dataset([("x", "numeric")], [(1.0,), (2.0,)], ["a", "b"])
    inst = ds.instance(1)
    assert inst.values == (2.0,)
    assert inst.label == "b"


def test_schema_rejects_duplicate_names():
    with pytest.raises(ValueError, match="unique"):
        AttributeSchema((Attribute("x", "numeric"), Attribute("x", "nominal")))


def test_subset_preserves_schema_and_provenance():
    ds = build_dataset([("x", "numeric")], [(1.0,), (2.0,), (3.0,)],
                       ["a", "b", "a"])
    sub = ds.subset([2, 0], note="picked")
    assert len(sub) == 2
    assert sub.instance(0).values == (3.0,)
    assert "picked" in sub.provenance


# --- fetcher ---------------------------------------------------------------


def _serve_once(payload: bytes):
    class Handler(http.server.BaseHTTPRequestHandler):
        def do_GET(self):
            self.send_response(200)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}/file.csv"


def test_fetch_downloads_and_verifies(tmp_path):
    payload = b"0,tcp,http,SF\n"
    digest = hashlib.sha256(payload).hexdigest()
    server, url = _serve_once(payload)
    try:
        path = fetch_dataset("mini", url, digest, tmp_path)
        assert path.read_bytes() == payload
        assert path.name == "mini.csv"
    finally:
        server.shutdown()


def test_fetch_cache_hit_needs_no_network(tmp_path):
    payload = b"cached-bytes"
    digest = hashlib.sha256(payload).hexdigest()
    cached = tmp_path / "mini.csv"
    cached.write_bytes(payload)
    # unreachable URL proves the cache satisfied the call
    path = fetch_dataset("mini", "http://127.0.0.1:1/file.csv", digest, tmp_path)
    assert path == cached


def test_fetch_digest_mismatch_removes_download(tmp_path):
    payload = b"tampered"
    server, url = _serve_once(payload)
    try:
        with pytest.raises(IntegrityError, match="digest mismatch"):
            fetch_dataset("mini", url, "00" * 32, tmp_path)
        assert list(tmp_path.iterdir()) == []
    finally:
        server.shutdown()


def test_fetch_refreshes_corrupt_cache(tmp_path):
    payload = b"good-bytes"
    digest = hashlib.sha256(payload).hexdigest()
    (tmp_path / "mini.csv").write_bytes(b"corrupt")
    server, url = _serve_once(payload)
    try:
        path = fetch_dataset("mini", url, digest, tmp_path)
        assert path.read_bytes() == payload
    finally:
        server.shutdown()


def test_sha256_file(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"abc")
    assert sha256_file(p) == hashlib.sha256(b"abc").hexdigest()

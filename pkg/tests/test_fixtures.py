"""The committed fixture bundles stay in sync with the oracle that made them."""

import importlib.util
import json
import pathlib

from vkpush.diagram import canonical_signature
from vkpush.oracle import build_scheme_entry
from vkpush.scheme import certify_coverage

_MK = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "make_fixtures.py"
_spec = importlib.util.spec_from_file_location("make_fixtures", _MK)
mk = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(mk)


def test_z2_bundle_verifies_and_certifies(z2_bundle):
    p, m, s = z2_bundle
    s.verify()
    k = certify_coverage(s, 0.05)
    assert (k.a, k.b, k.A, k.B, k.q_min) == (1.0, 2.0, 5.0, 4, 4.0)


def test_heisenberg_bundle_verifies_and_certifies(heisenberg_bundle):
    p, m, s = heisenberg_bundle
    s.verify()
    k = certify_coverage(s, 0.01)
    assert k.a > 0.0
    assert k.B == 5


def test_fixture_files_match_regeneration_script():
    root = pathlib.Path(mk.HERE)
    for name, bundle in (("z2", mk.z2_bundle()), ("heisenberg", mk.heisenberg_bundle())):
        on_disk = json.loads((root / f"{name}.json").read_text())
        assert on_disk == bundle, f"{name}.json is stale; rerun fixtures/make_fixtures.py"


def test_heisenberg_fixture_matches_fresh_oracle_build(heisenberg_bundle):
    p, m, s = heisenberg_bundle
    for e in s.entries:
        conj = {x: tuple(w) for x, w in e.conj.items()}
        rebuilt = build_scheme_entry(p, m, e.t, conj, max_area=4, max_len=12)
        for i in e.fillings:
            assert canonical_signature(e.fillings[i]) == canonical_signature(rebuilt.fillings[i])

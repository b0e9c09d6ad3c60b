"""Shared fixtures: corpus curves built once per test session."""
from functools import lru_cache

from hqwillmore.corpus import corpus
from hqwillmore.curve import build_curve
from hqwillmore.domain import build_mesh


@lru_cache(maxsize=None)
def mesh(depth):
    return build_mesh(depth)


@lru_cache(maxsize=None)
def spec(name):
    return corpus()[name]


@lru_cache(maxsize=None)
def curve(name, depth):
    return build_curve(spec(name), mesh(depth))


# criterion number -> list of (passed, detail); printed once per criterion at the end of the run
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}", flush=True)

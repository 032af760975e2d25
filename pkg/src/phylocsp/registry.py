"""Name resolution for payoff functions.

Built-in names::

    triplet            uv|w on arguments (u, v, w)
    quartet            ab|cd on a rooted surrogate tree
    fstar, fstar:D     triplet with a (1-D) penalty unless the order is u, v, w (D = 0.1)
    split-right-K      split-one-to-the-right predicate on K arguments
    split-left-K       its mirror image
    constant-K         payoff 1 on every pattern of arity K

A :class:`Registry` starts with the built-ins available on demand and can
be extended with tables loaded from a file.
"""

from __future__ import annotations

import re

from .errors import ArgumentError
from .patterns import PayoffFunction, parse_tables

__all__ = ["Registry", "builtin_payoff", "load_registry", "BUILTIN_NAMES"]

BUILTIN_NAMES = ("triplet", "quartet", "fstar", "fstar:D", "split-right-K", "split-left-K", "constant-K")


def builtin_payoff(name: str) -> PayoffFunction:
    from . import problems

    if name == "triplet":
        return problems.triplet_payoff()
    if name == "quartet":
        return problems.quartet_payoff()
    if name == "fstar":
        return problems.fstar_payoff(0.1, name="fstar")
    m = re.fullmatch(r"fstar:([0-9.eE+-]+)", name)
    if m:
        return problems.fstar_payoff(float(m.group(1)), name=name)
    m = re.fullmatch(r"split-(right|left)-(\d+)", name)
    if m:
        k = int(m.group(2))
        if m.group(1) == "right":
            return problems.split_one_right_payoff(k)
        return problems.split_one_left_payoff(k)
    m = re.fullmatch(r"constant-(\d+)", name)
    if m:
        k = int(m.group(1))
        if k < 1:
            raise ArgumentError("constant payoff needs arity >= 1")
        return PayoffFunction(k, {}, default=1.0, name=name)
    raise ArgumentError(f"unknown payoff {name!r}")


class Registry(dict):
    """Mapping from payoff names to :class:`PayoffFunction`, with built-in fallback."""

    def __missing__(self, name):
        f = builtin_payoff(name)
        self[name] = f
        return f

    def resolve(self, name: str) -> PayoffFunction:
        return self[name]

    def register(self, f: PayoffFunction, name: str | None = None) -> str:
        name = name or f.name
        if not name:
            raise ArgumentError("payoff needs a name")
        self[name] = f
        return name

    def __contains__(self, name):
        if dict.__contains__(self, name):
            return True
        try:
            self[name]
        except ArgumentError:
            return False
        return True


def load_registry(path=None, text: str | None = None) -> Registry:
    """Registry with built-ins plus every table defined in ``path`` or ``text``."""
    reg = Registry()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    if text:
        reg.update(parse_tables(text))
    return reg

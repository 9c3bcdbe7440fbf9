"""Guard-script injection: placement, byte preservation, idempotence."""
from __future__ import annotations

import re
from pathlib import Path

import pytest

from linkfence.inject import MARKER, build_payload, inject

CORPUS = sorted((Path(__file__).parent / "fixtures" / "inject").glob("*.html"))
HEAD_OPEN = re.compile(r"<head\b[^>]*>", re.IGNORECASE)
BODY_OPEN = re.compile(r"<body\b[^>]*>", re.IGNORECASE)


def corpus_docs():
    return [(p.name, p.read_text("utf-8")) for p in CORPUS]


def test_corpus_is_twenty_documents():
    assert len(CORPUS) == 20


def test_payload_marker_exactly_once():
    payload = build_payload()
    assert payload.element.count(MARKER) == 1
    # self-contained: nothing fetched, nothing referenced
    assert "http://" not in payload.source and "src=" not in payload.element.split(">")[0]


def test_payload_position_after_head_tag():
    doc = "<html><head><title>t</title></head><body></body></html>"
    out = inject(doc)
    head_end = HEAD_OPEN.search(out).end()
    assert out[head_end:].startswith(build_payload().element)
    assert out.index(MARKER) < out.index("<title>")


@pytest.mark.parametrize("name,doc", corpus_docs())
def test_corpus_injection(name, doc):
    out = inject(doc)
    element = build_payload().element
    # exactly one payload
    assert out.count(MARKER) == 1
    # pure insertion: all input preserved in order, length adds up exactly
    at = out.index(element)
    assert out[:at] + out[at + len(element):] == doc
    assert len(out) == len(doc) + len(element)
    # placement: right after head-open when present, else before body-open,
    # else document start
    head = HEAD_OPEN.search(doc)
    body = BODY_OPEN.search(doc)
    if head:
        assert at == head.end()
    elif body:
        assert at == body.start()
    else:
        assert at == 0


@pytest.mark.parametrize("name,doc", corpus_docs())
def test_corpus_idempotence(name, doc):
    once = inject(doc)
    assert inject(once) == once
    assert once.count(MARKER) == 1


def test_payload_precedes_original_scripts_when_head_exists():
    for name, doc in corpus_docs():
        if not HEAD_OPEN.search(doc):
            continue
        out = inject(doc)
        first_script = re.search(r"<script\b", out, re.IGNORECASE)
        assert MARKER in out[first_script.start():first_script.end() + 80], name


def test_headless_fragment_prepended():
    out = inject("<p>x</p>")
    assert out.startswith(build_payload().element)
    assert out.endswith("<p>x</p>")

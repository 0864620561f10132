#!/usr/bin/env python3
"""Regenerate fixtures/responses.json from a live backend.

Responses come through the HTTP interface exactly as the browser would
see them; the expected selection sums are computed from those response
payloads with the backend's own attribution routine, so the frontend
math can be checked against the service bit-for-bit.

Usage: python3 scripts/make_fixtures.py  (from the frontend/ directory)
"""

import json
from pathlib import Path

import numpy as np
from starlette.testclient import TestClient

from ragscope import synth
from ragscope.config import AppConfig
from ragscope.inference import TokenAttribution, selection_attribution
from ragscope.service import create_api_app

KEY = "fixture-key"
QUERIES = [
    {"query": "what happens to the mountain snow and ridge"},
    {"query": "what happens to the market price", "k": 4},
    {"query": "what happens to the river delta current", "k": 2},
]
SELECTIONS_PER_RESPONSE = 7  # 3 responses x 7 > 20 checked pairs


def main() -> None:
    import tempfile

    cfg = AppConfig.model_validate(
        {
            "api": {"keys": [KEY]},
            "retrieval": {"k_default": 3},
            "inference": {"max_tokens": 24},
        }
    )
    texts = synth.make_corpus(num_docs=48, seed=11, min_tokens=80, max_tokens=200)
    stack = synth.build_stack(
        Path(tempfile.mkdtemp(prefix="fixtures-")), texts, partitions=2, config=cfg
    )
    client = TestClient(create_api_app(stack))

    rng = np.random.default_rng(2024)
    cases = []
    for body in QUERIES:
        resp = client.post("/api/query", json=body, headers={"X-API-Key": KEY})
        resp.raise_for_status()
        payload = resp.json()
        att = payload["attribution"]
        matrix = np.array(att["values"], dtype=np.float64).reshape(
            att["out_len"], att["in_len"]
        )
        attr = TokenAttribution(matrix=matrix)
        selections = []
        for _ in range(SELECTIONS_PER_RESPONSE):
            size = int(rng.integers(1, att["out_len"] + 1))
            outputs = sorted(
                {int(o) for o in rng.integers(0, att["out_len"], size=size)}
            )
            sums, scaled = selection_attribution(attr, outputs)
            selections.append(
                {
                    "outputs": outputs,
                    "sums": sums.tolist(),
                    "scaled": scaled.tolist(),
                }
            )
        cases.append({"request": body, "response": payload, "selections": selections})

    out = Path(__file__).resolve().parent.parent / "fixtures" / "responses.json"
    out.write_text(json.dumps(cases, indent=1) + "\n", encoding="utf-8")
    total = sum(len(c["selections"]) for c in cases)
    print(f"wrote {len(cases)} responses, {total} selections -> {out}")


if __name__ == "__main__":
    main()

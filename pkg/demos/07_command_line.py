"""The ``roo`` command line, driven from Python over the test fixtures.

Every command is also available from a shell, e.g.
``roo determine tests/fixtures/boms/matchbox.json --explain``.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

from roo.cli import main

FIX = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def roo(*args: str) -> int:
    out, err = io.StringIO(), io.StringIO()
    code = main(list(args), out, err)
    print(f"$ roo {' '.join(args)}".replace(str(FIX) + os.sep, ""))
    print(out.getvalue() + err.getvalue(), end="")
    print(f"(exit {code})\n")
    return code


roo("determine", str(FIX / "boms/dilution.json"), "--explain")
roo("determine", "--bom-dir", str(FIX / "boms"))
roo("determine", str(FIX / "unknown_currency.json"))
roo("cert", "validate", str(FIX / "certs/certificate.json"), str(FIX / "certs/docs_typo.json"), "--date", "2023-02-01")
roo("rules", "lint", str(FIX / "catalogs/clean.rules"))
roo("verify", "replay", str(FIX / "logs/case_illegal.jsonl"))
roo("stats", "utilization", "64", "100")

# Structured reports are canonical JSON: two runs give identical bytes.
with tempfile.TemporaryDirectory() as tmp:
    a, b = Path(tmp, "a.json"), Path(tmp, "b.json")
    for target in (a, b):
        main(["determine", str(FIX / "boms/matchbox.json"), "--out", str(target)], io.StringIO(), io.StringIO())
    print("byte-identical reports:", a.read_bytes() == b.read_bytes())

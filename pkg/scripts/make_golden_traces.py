"""Regenerate the per-procedure golden traces under tests/golden/."""

from pathlib import Path

from femtohandover.handover import HandoverKind, format_trace, trace_procedure

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for kind in HandoverKind:
        for admit, suffix in ((True, ""), (False, "_reject")):
            session = trace_procedure(kind, seed=0, admit=admit)
            path = OUT / f"{kind.value.lower()}{suffix}.tsv"
            path.write_text("".join(line + "\n" for line in format_trace(session)), encoding="utf-8")
            print(f"{path.name}: {len(session.trace)} steps, {session.outcome.value}")


if __name__ == "__main__":
    main()

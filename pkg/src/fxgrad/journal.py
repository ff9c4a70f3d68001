from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Sequence


@dataclass
class Journal:
    """Markdown run report built from headed sections."""

    title: str
    stamp: bool = True
    lines: List[str] = field(default_factory=list)

    def add(self, heading: str, content: str) -> None:
        self.lines.append(f"\n## {heading}\n{content}")

    def add_table(self, heading: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
        out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row in rows:
            out.append("| " + " | ".join(_cell(v) for v in row) + " |")
        self.add(heading, "\n".join(out))

    def to_markdown(self) -> str:
        header = f"# {self.title}\n"
        if self.stamp:
            header += f"Generated at {datetime.now(timezone.utc).isoformat()}\n"
        return header + "\n".join(self.lines) + "\n"

    def save(self, dir_path: Optional[str] = None, filename: Optional[str] = None) -> str:
        base = dir_path or os.getenv("FXGRAD_JOURNAL_DIR") or "."
        os.makedirs(base, exist_ok=True)
        name = filename or f"fxgrad_run_{datetime.now(timezone.utc).strftime('%Y%m%d_%H%M%S')}.md"
        path = os.path.join(base, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_markdown())
        return path


def _cell(v: object) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)

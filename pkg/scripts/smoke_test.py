import os
import sys
import json
import tempfile
import time


def main() -> int:
    # Ensure src/ is importable without installing the package
    repo_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
    src = os.path.join(repo_root, "src")
    if src not in sys.path:
        sys.path.insert(0, src)

    try:
        from fxgrad.cli import main as fxgrad_main
    except Exception as e:
        print(json.dumps({"ok": False, "stage": "import", "error": f"Failed to import fxgrad: {e}"}))
        return 2

    with tempfile.TemporaryDirectory(prefix="fxgrad-smoke-") as tmp:
        data_dir = os.path.join(tmp, "data")
        out_dir = os.path.join(tmp, "run")
        common = ["--preset", "smoke", "--out", out_dir, "--set", f"data.dir={data_dir}", "--log-level", "WARNING"]
        stages = [
            ("datagen", ["datagen", *common]),
            ("train", ["train", *common]),
            ("eval", ["eval", *common]),
            ("gradcheck", ["gradcheck", "--effect", "gain", "--seeds", "50", "--log-level", "WARNING"]),
        ]
        timings = {}
        for name, argv in stages:
            t0 = time.perf_counter()
            try:
                code = fxgrad_main(argv)
            except Exception as e:
                print(json.dumps({"ok": False, "stage": name, "error": str(e)}))
                return 3
            timings[name] = round(time.perf_counter() - t0, 2)
            if code != 0:
                print(json.dumps({"ok": False, "stage": name, "exit_code": code, "seconds": timings}))
                return 1
        print(json.dumps({"ok": True, "seconds": timings}))
        return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Start the annotation service on a toy run for the UI integration tests.

Builds a scratch run (corpus, event detection, candidate generation), serves
the annotation API on a free port, and prints "PORT <n>" once listening.
It then waits on stdin; a "LEARN" line runs the reward-fitting step against
whatever the UI stored and reports the keywords that step consumed. Exits
when stdin closes.
"""

import json
import sys
import threading
from pathlib import Path

from chronoline.datasets import TOY_TOPIC, write_toy_corpus
from chronoline.pipeline import (
    Run,
    cmd_candidates,
    cmd_detect,
    cmd_learn_reward,
    parse_config,
    serve_annotation,
)


def main() -> None:
    root = Path(sys.argv[1])
    corpus, reference = write_toy_corpus(root / "data")
    config_path = root / "fixture.cfg"
    config_path.write_text("\n".join([
        f"corpus={corpus}",
        f"reference={reference}",
        f"topic={TOY_TOPIC}",
        f"workdir={root / 'runs'}",
        "threshold=0.5",
        "candidate-count=5",
        "max-summary-tokens=16",
        "seed=0",
    ]) + "\n", encoding="utf-8")

    run = Run("ui-fixture", parse_config(config_path))
    cmd_detect(run)
    cmd_candidates(run)

    server = serve_annotation(run, "127.0.0.1", 0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    print(f"PORT {server.server_address[1]}", flush=True)

    for line in sys.stdin:
        if line.strip() != "LEARN":
            continue
        try:
            _, reward_config = cmd_learn_reward(run)
            keywords = run.load_keywords()
            print("KEYWORDS " + json.dumps(list(keywords.keywords)), flush=True)
            print(f"LEARNED alpha={reward_config.alpha:.6f}", flush=True)
        except Exception as e:  # noqa: BLE001 - reported to the driving test
            print(f"ERROR {e}", flush=True)

    server.shutdown()


if __name__ == "__main__":
    main()

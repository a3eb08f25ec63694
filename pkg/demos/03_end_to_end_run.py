"""Full augmentation run against the bundled mock backend.

Per document and round the pipeline builds 3 novel + 2 rephrase
constraint sets, renders instructions, generates, relabels, validates,
and merges accepted records into the gold set. With the mock backend
the whole run is a pure function of the configuration.

    python demos/03_end_to_end_run.py
"""

import json
import tempfile
from pathlib import Path

from coda import RunConfig, run_augmentation

DATA = Path(__file__).parent / "data" / "demo_news.jsonl"

with tempfile.TemporaryDirectory() as workdir:
    config = RunConfig(
        task="classification",
        dataset_path=str(DATA),
        output_dir=workdir,
        dataset_name="demo_news",
        seed=7,
        rounds=1,  # 5 augmentations per document; raise to sweep R
    )
    result = run_augmentation(config)

    print(f"gold documents:    {len(result.records) // 5}")
    print(f"generated records: {len(result.records)} "
          f"({sum(r.mode == 'novel' for r in result.records)} novel, "
          f"{sum(r.mode == 'rephrase' for r in result.records)} rephrase)")
    print(f"merged dataset:    {len(result.dataset)} documents")
    print()

    print("faithfulness (percent of generations meeting each constraint):")
    print(result.faithfulness.to_text())
    print()
    print("quality:", json.dumps(result.quality.to_json(), indent=1, sort_keys=True))
    print()

    record = result.records[0]
    print("--- one record ---")
    print("instruction:", record.instruction.text[:180], "...")
    print("generation: ", record.generation[:180])
    print("label:      ", record.payload.label)
    print("verdict:    ", f"lexical strict={record.verdict.lexical_strict}, "
                          f"length strict={record.verdict.length_strict}")
    print()

    print("artifacts written:")
    for path in sorted(Path(workdir).iterdir()):
        print(f"  {path.name:20} {path.stat().st_size:7} bytes")

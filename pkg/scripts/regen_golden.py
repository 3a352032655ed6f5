"""Regenerate tests/golden/default_cylinder.json from an oracle run.

    python3 scripts/regen_golden.py
"""

import json
from pathlib import Path

from pageflat import synth
from pageflat.pipeline import PipelineConfig, flatten

TOLERANCE = {"ssim": 0.01, "line_straightness": 0.25, "mesh_rmse": 0.25}


def main():
    scene, spec = synth.scene_from_dict({})
    truth = synth.render(scene, spec)
    result = flatten(truth.image, PipelineConfig(grid=(spec.M, spec.N)))
    metrics = synth.score(result.image, truth, result.lattices[0])
    out = Path(__file__).resolve().parent.parent / "tests" / "golden" / "default_cylinder.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "scene": synth.DEFAULT_SCENE,
        "metrics": {k: round(v, 6) for k, v in metrics.items()},
        "tolerance": TOLERANCE,
    }
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload["metrics"], indent=2))


if __name__ == "__main__":
    main()

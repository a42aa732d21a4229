"""End to end: stitch a synthetic pair and then drive the CLI."""
import json
import tempfile
from pathlib import Path

from halfcyl.cli import main
from halfcyl.pipeline import height_profile, save_image, stitch_images, synthetic_pair, synthetic_texture

pair = synthetic_pair(480, 640, overlap=0.3, perspective=-3e-4, seed=0)
res = stitch_images(pair.ref, pair.tgt)
print(json.dumps(json.loads(res.report.to_json()), indent=1))
print("mean column height", round(float(height_profile(res).mean()), 1), "target", round(res.h_target, 1))

d = Path(tempfile.mkdtemp())
save_image(synthetic_texture(400, 700, seed=2), d / "src.png")
main(["synth", str(d / "src.png"), "--overlap", "0.3", "--perspective", "2e-4", "-o", str(d)])
code = main(["stitch", str(d / "ref.png"), str(d / "tgt.png"), "-o", str(d / "out.png"), "--metrics", str(d / "m.json")])
print("exit code", code, "->", d / "out.png")

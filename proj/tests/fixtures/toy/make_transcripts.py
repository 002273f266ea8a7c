#!/usr/bin/env python3
"""Regenerates the scripted transcripts under transcripts/.

The JSON files are committed; tests read them directly. Run this after
changing a migrated file body or the scripted flows below.
"""
import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent
OUT = HERE / "transcripts"

MIGRATED = {
    "utils": '''import jax
import jax.numpy as jnp


def dense_init(key, shape):
    return jax.random.normal(key, shape) * 0.02


def flatten(x):
    return x.reshape(x.shape[0], -1)
''',
    "layers": '''import flax.linen as nn
import jax.numpy as jnp

from migrated import utils


class Dense(nn.Module):
    units: int

    @nn.compact
    def __call__(self, x):
        w = self.param("w", utils.dense_init, (x.shape[-1], self.units))
        b = self.param("b", nn.initializers.zeros, (self.units,))
        return nn.relu(jnp.matmul(x, w) + b)
''',
    "metrics": '''import jax.numpy as jnp
import optax

from migrated import utils


def accuracy(logits, labels):
    preds = jnp.argmax(utils.flatten(logits), axis=-1)
    return jnp.mean(preds == labels)


def cross_entropy(logits, labels):
    return jnp.mean(optax.softmax_cross_entropy_with_integer_labels(logits, labels))
''',
    "features": '''import jax.numpy as jnp

from migrated import utils


def normalize(x):
    mean = jnp.mean(x, axis=0)
    var = jnp.var(x, axis=0)
    return (x - mean) / jnp.sqrt(var + 1e-6)


def preprocess(batch):
    return utils.flatten(normalize(batch.astype(jnp.float32)))
''',
    "model": '''import flax.linen as nn

from migrated import features, layers, metrics


class Classifier(nn.Module):
    hidden: int = 64
    classes: int = 10

    @nn.compact
    def __call__(self, batch, *, deterministic: bool = True):
        x = layers.Dense(self.hidden)(features.preprocess(batch))
        return nn.Dense(self.classes)(x)


def evaluate(model, params, batch, labels):
    logits = model.apply(params, batch)
    return {"accuracy": metrics.accuracy(logits, labels), "loss": metrics.cross_entropy(logits, labels)}
''',
}

# The single-agent flow forgets the metrics module and inlines nothing.
SINGLE_MODEL = '''import flax.linen as nn

from migrated import features, layers


class Classifier(nn.Module):
    hidden: int = 64
    classes: int = 10

    @nn.compact
    def __call__(self, batch, *, deterministic: bool = True):
        x = layers.Dense(self.hidden)(features.preprocess(batch))
        return nn.Dense(self.classes)(x)
'''

STEPS = [
    (1, "Migrate utils", "utils", [],
     "Port the initializer and flatten helpers to jax.numpy. dense_init takes a PRNG key.",
     "migrated/utils.py exists and the build passes."),
    (2, "Migrate layers", "layers", [1],
     "Rewrite Dense as a flax.linen module declaring w and b with self.param.",
     "migrated/layers.py defines Dense as nn.Module and the build passes."),
    (3, "Migrate metrics", "metrics", [1],
     "Port accuracy and cross_entropy metric functions; use optax for the loss.",
     "migrated/metrics.py exists and the build passes."),
    (4, "Migrate features", "features", [1],
     "Port normalize and preprocess to jax.numpy.",
     "migrated/features.py exists and the build passes."),
    (5, "Migrate model", "model", [2, 3, 4],
     "Rewrite Classifier as a flax.linen module and evaluate() on top of model.apply.",
     "migrated/model.py defines Classifier and the build passes."),
]


def fenced(info, body, ticks=3):
    fence = "`" * ticks
    if not body.endswith("\n"):
        body += "\n"
    return f"{fence}{info}\n{body}{fence}\n"


def tool(name, **args):
    return fenced("tool", json.dumps({"tool": name, "args": args}))


def write(module, content=None):
    return tool("write_file", path=f"migrated/{module}.py", content=content or MIGRATED[module])


def plan_doc(refined):
    steps = []
    for sid, title, module, deps, instr, valid in STEPS:
        if refined and module == "utils":
            instr += " Callers expect flatten to keep the batch dimension."
        steps.append({
            "step_id": sid,
            "title": title,
            "source_files": [f"legacy/{module}.py"],
            "target_files": [f"migrated/{module}.py"],
            "instructions": instr,
            "validation": valid,
            "dependencies": deps,
        })
    return json.dumps({"steps": steps}, indent=2)


def summary(changes, learnings):
    return fenced("summary", f"## 1. Changes Made\n{changes}\n\n## 2. Key Fixes & Learnings\n{learnings}\n")


def entry(tag, response):
    return {"tag": tag, "response": response}


def coder(chunk, kind, n, response, attempt=1):
    return entry(f"coder.chunk.{chunk}.attempt.{attempt}.{kind}.{n}", response)


DONE = fenced("done", "")
CONFIRMED = fenced("confirmed", "")
BUILD = tool("run_build")


def pipeline_multi():
    e = [
        entry("planner.round.1",
              "The root imports layers, metrics and features, which all share a helper module.\n\n"
              + fenced("plan", plan_doc(False)) + "\n" + fenced("requests", "legacy/utils.py")),
        entry("planner.round.2", "With utils in view the plan is complete.\n\n" + fenced("plan", plan_doc(True))),
        # chunk 0: steps 1-2; declares done before building once.
        coder(0, "turn", 1, "Reading the legacy helper first.\n" + tool("read_file", path="legacy/utils.py")),
        coder(0, "turn", 2, write("utils")),
        coder(0, "turn", 3, write("layers")),
        coder(0, "turn", 4, "Both files are written.\n" + DONE),
        coder(0, "turn", 5, BUILD),
        coder(0, "turn", 6, "The build passes.\n" + DONE),
        coder(0, "review", 1, "Both validation conditions hold.\n" + CONFIRMED),
        coder(0, "summary", 1, summary(
            "- Added migrated/utils.py with key-based dense_init and flatten.\n"
            "- Added migrated/layers.py with Dense as a flax module.",
            "- dense_init now takes a PRNG key instead of a seed.")),
        # chunk 1: steps 3-4; the review triggers another check and a second done.
        coder(1, "turn", 1, write("metrics")),
        coder(1, "turn", 2, write("features")),
        coder(1, "turn", 3, BUILD),
        coder(1, "turn", 4, DONE),
        coder(1, "review", 1, "Checking that nothing still references TensorFlow.\n"
              + tool("grep", pattern="tensorflow", path="migrated")),
        coder(1, "turn", 5, "No references remain.\n" + DONE),
        coder(1, "review", 2, CONFIRMED),
        coder(1, "summary", 1, fenced("summary", "Ported metrics and features.\n")),
        coder(1, "summary", 2, summary(
            "- Added migrated/metrics.py (accuracy, cross_entropy via optax).\n"
            "- Added migrated/features.py (normalize, preprocess).",
            "- tf.nn.moments became jnp.mean and jnp.var.")),
        # chunk 2: step 5.
        coder(2, "turn", 1, write("model")),
        coder(2, "turn", 2, BUILD),
        coder(2, "turn", 3, DONE),
        coder(2, "review", 1, CONFIRMED),
        coder(2, "summary", 1, summary(
            "- Added migrated/model.py with Classifier as a flax module and evaluate().",
            "- evaluate() takes params explicitly.")),
    ]
    return {"mode": "tag", "entries": e}


def coder_single():
    e = [
        coder(0, "turn", 1, tool("list_files", path="legacy")),
        coder(0, "turn", 2, write("utils")),
        coder(0, "turn", 3, write("layers")),
        coder(0, "turn", 4, write("features")),
        coder(0, "turn", 5, write("model", SINGLE_MODEL)),
        coder(0, "turn", 6, BUILD),
        coder(0, "turn", 7, DONE),
        coder(0, "review", 1, CONFIRMED),
        coder(0, "summary", 1, summary(
            "- Migrated utils, layers, features and model.",
            "- Dropped the evaluate helper.")),
    ]
    return {"mode": "tag", "entries": e}


CHECKLIST_ITEMS = 8


def verdict(failing, evidence):
    lines = []
    for i in range(1, CHECKLIST_ITEMS + 1):
        mark = "FAIL" if i in failing else "PASS"
        lines.append(f"ITEM {i}: {mark} -- {evidence.get(i, 'checked in migrated/')}")
    return fenced("verdict", "\n".join(lines))


def judge(runs, flow):
    e = []
    for r in range(1, runs + 1):
        for n, response in enumerate(flow, start=1):
            e.append(entry(f"judge.run.{r}.turn.{n}", response))
    return {"mode": "tag", "entries": e}


def judge_multi():
    return judge(3, [
        tool("list_files", path="migrated"),
        "Comparing against the original.\n" + tool("read_file", path="legacy/model.py"),
        tool("read_file", path="migrated/model.py"),
        tool("grep", pattern="optax", path="migrated"),
        verdict(set(), {5: "migrated/metrics.py present", 7: "metrics.py line 12 uses optax"}),
    ])


def judge_single():
    return judge(3, [
        tool("list_files", path="migrated"),
        tool("read_file", path="migrated/metrics.py"),
        verdict({5, 6, 7}, {5: "migrated/metrics.py does not exist", 6: "no accuracy function found",
                            7: "no cross_entropy function found"}),
    ])


def playbook_gen():
    units = [
        {"unit": "model class", "source": ["golden/mlp_tf/mlp.py:4-13"], "target": ["golden/mlp_jax/mlp.py:10-17"]},
        {"unit": "training step", "source": ["golden/mlp_tf/mlp.py:16-21"], "target": ["golden/mlp_jax/mlp.py:20-27"]},
    ]
    body = (
        "# Generated team playbook\n\n"
        "- Keras models become `nn.Module` subclasses with `@nn.compact` and a typed `sizes` attribute.\n"
        "- `training=` flags become keyword-only `deterministic` arguments.\n"
        "- Gradient tapes become `jax.value_and_grad` inside a `jax.jit` train step using `optax`.\n\n"
        "```python\n"
        "@jax.jit\n"
        "def train_step(params, opt_state, x, y, *, model, tx):\n"
        "    loss, grads = jax.value_and_grad(loss_fn)(params)\n"
        "    updates, opt_state = tx.update(grads, opt_state, params)\n"
        "    return optax.apply_updates(params, updates), opt_state, loss\n"
        "```\n"
    )
    return {"mode": "tag", "entries": [
        entry("playbook.decompose.mlp_tf", fenced("units", json.dumps(units, indent=2))),
        entry("playbook.summarize", fenced("playbook", body, ticks=4)),
    ]}


def main():
    OUT.mkdir(exist_ok=True)
    files = {
        "pipeline_multi.json": pipeline_multi(),
        "coder_single.json": coder_single(),
        "judge_multi.json": judge_multi(),
        "judge_single.json": judge_single(),
        "playbook_gen.json": playbook_gen(),
    }
    for name, doc in files.items():
        (OUT / name).write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()

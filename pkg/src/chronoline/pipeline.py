"""Workflow orchestration: staged commands over a persistent run directory,
plus the annotation HTTP service.

A run lives in <workdir>/<run_id>/ and advances through the stages
detected -> candidates -> preferences-collected -> reward-learned ->
trained -> generated.  Every stage writes its artifacts before the state
marker moves, and invoking a stage whose predecessor has not run fails
without side effects.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, fields, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .corpus import (
    ArticleCollection,
    EventSummary,
    KeywordSet,
    Timeline,
    detokenize,
    load_collection,
    load_timeline,
    save_timeline,
    truncate_collection,
)
from .embedding import (
    avg_sentence_embedding,
    hashed_embedding_provider,
    remote_embedding_provider,
    tfidf_fit,
    timeline_embedding,
)
from .errors import ParseError, StageGatingError, ValidationError
from .evaluate import MetricReport, evaluate_timeline
from .event_detection import (
    ClusterSet,
    assign_dates,
    cluster_agglomerative,
    cluster_markov,
    load_clusters,
    rank_clusters,
    save_clusters,
    select_top_l,
)
from .gppl import (
    GpplConfig,
    PreferenceDataset,
    PreferencePair,
    fit_gppl,
    load_score_model,
    save_score_model,
)
from .reward import (
    RewardConfig,
    RewardContext,
    calibrate_alpha,
    load_reward_config,
    ngram_lm_fit,
    save_reward_config,
)
from .rl import Critic, AdamW, TrainConfig, load_checkpoint, save_checkpoint, save_training_log, train_on_cluster
from .summarise import (
    TokenPolicy,
    assemble_timeline,
    centroid_opt,
    generate_event_summary,
    policy_init_from_cluster,
)

STAGES = (
    "detected",
    "candidates",
    "preferences-collected",
    "reward-learned",
    "trained",
    "generated",
)

# sub-stream tags so every stage draws from its own split of the root seed
_CANDIDATE_STREAM = 101


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = ""
    reference: str = ""
    topic: str = ""
    workdir: str = "runs"
    provider: str = "hashed"  # hashed | tfidf | remote
    dim: int = 64
    provider_seed: int = 0
    endpoint: str = ""
    embed_timeout: float = 10.0
    embed_retries: int = 2
    algorithm: str = "agglomerative"  # agglomerative | markov
    threshold: float = 0.7
    inflation: float = 2.0
    max_iter: int = 100
    top_l: int = 0  # 0 -> reference date count, else all clusters
    truncate_k: int = 5
    candidate_count: int = 5
    centroid_budget: int = 1
    w: float = 0.5
    gamma1: float = 0.25
    gamma2: float = 0.25
    gamma3: float = 0.25
    gamma4: float = 0.25
    alpha: float = 0.0  # 0 -> calibrate on the corpus texts
    normalize_keywords: bool = False
    lm_order: int = 3
    lm_discount: float = 0.1
    episodes_per_cluster: int = 300
    actor_lr: float = 2e-4
    critic_lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    max_summary_tokens: int = 48
    reward_stride: int = 1
    delta_shaping: bool = False
    seed: int = 0
    per_cluster_policy: bool = False
    static_dir: str = ""

    def config_hash(self) -> str:
        payload = json.dumps(
            {f.name: getattr(self, f.name) for f in fields(self)}, sort_keys=True
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            episodes_per_cluster=self.episodes_per_cluster,
            actor_lr=self.actor_lr,
            critic_lr=self.critic_lr,
            adam_betas=(self.adam_beta1, self.adam_beta2),
            adam_eps=self.adam_eps,
            weight_decay=self.weight_decay,
            max_summary_tokens=self.max_summary_tokens,
            reward_stride=self.reward_stride,
            delta_shaping=self.delta_shaping,
            seed=self.seed,
        )

    def reward_config(self, alpha: float | None = None) -> RewardConfig:
        return RewardConfig(
            w=self.w,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            gamma3=self.gamma3,
            gamma4=self.gamma4,
            alpha=alpha if alpha is not None else (self.alpha or 1.0),
            normalize_keywords=self.normalize_keywords,
        )


_BOOL_KEYS = {"normalize_keywords", "delta_shaping", "per_cluster_policy"}
_STR_KEYS = {"corpus", "reference", "topic", "workdir", "provider", "endpoint",
             "algorithm", "static_dir"}
_FLOAT_KEYS = {"threshold", "inflation", "w", "gamma1", "gamma2", "gamma3", "gamma4",
               "alpha", "lm_discount", "actor_lr", "critic_lr", "adam_beta1",
               "adam_beta2", "adam_eps", "weight_decay", "embed_timeout"}


def parse_config(path: str | Path) -> PipelineConfig:
    """Read a KEY=VALUE config file; unknown keys are rejected."""
    known = {f.name for f in fields(PipelineConfig)}
    values: dict = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected KEY=VALUE", line=lineno)
            key, _, raw = line.partition("=")
            key = key.strip().lower().replace("-", "_")
            raw = raw.strip()
            if key not in known:
                raise ParseError(f"unknown config key {key!r}", line=lineno)
            try:
                if key in _BOOL_KEYS:
                    values[key] = raw.lower() in ("true", "1", "yes")
                elif key in _STR_KEYS:
                    values[key] = raw
                elif key in _FLOAT_KEYS:
                    values[key] = float(raw)
                else:
                    values[key] = int(raw)
            except ValueError as e:
                raise ParseError(f"bad value for {key}: {raw!r}", line=lineno) from e
    return PipelineConfig(**values)


def build_provider(config: PipelineConfig, collection: ArticleCollection | None = None):
    if config.provider == "hashed":
        return hashed_embedding_provider(config.dim, config.provider_seed)
    if config.provider == "tfidf":
        if collection is None:
            raise ValidationError("tfidf provider needs the corpus to fit on")
        return tfidf_fit(collection)
    if config.provider == "remote":
        if not config.endpoint:
            raise ValidationError("remote provider needs an endpoint")
        return remote_embedding_provider(config.endpoint, config.dim,
                                         timeout=config.embed_timeout,
                                         retries=config.embed_retries)
    raise ValidationError(f"unknown provider {config.provider!r}")


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineState:
    run_id: str
    stage: str
    config_hash: str
    artifacts: dict

    def stage_index(self) -> int:
        return STAGES.index(self.stage) if self.stage in STAGES else -1


class Run:
    """Handle on one run directory: state, stores, artifact paths."""

    def __init__(self, run_id: str, config: PipelineConfig, workdir: str | Path | None = None):
        if not re.fullmatch(r"[A-Za-z0-9._\-]+", run_id):
            raise ValidationError("run id may use letters, digits, dot, dash, underscore")
        self.run_id = run_id
        self.config = config
        self.dir = Path(workdir or config.workdir) / run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self._state_lock = threading.Lock()
        state = self._read_state()
        if state is not None and state.config_hash != config.config_hash():
            raise ValidationError(
                "run was started under a different config; use a fresh run id"
            )

    # paths
    @property
    def state_path(self) -> Path:
        return self.dir / "state.json"

    @property
    def clusters_path(self) -> Path:
        return self.dir / "clusters.jsonl"

    @property
    def candidates_dir(self) -> Path:
        return self.dir / "candidates"

    @property
    def manifest_path(self) -> Path:
        return self.candidates_dir / "manifest.json"

    @property
    def preferences_path(self) -> Path:
        return self.dir / "preferences.jsonl"

    @property
    def keywords_path(self) -> Path:
        return self.dir / "keywords.json"

    @property
    def score_model_path(self) -> Path:
        return self.dir / "score_model.json"

    @property
    def reward_config_path(self) -> Path:
        return self.dir / "reward_config.txt"

    @property
    def checkpoints_dir(self) -> Path:
        return self.dir / "checkpoints"

    @property
    def training_log_path(self) -> Path:
        return self.dir / "training_log.jsonl"

    @property
    def timeline_path(self) -> Path:
        return self.dir / "timeline.jsonl"

    @property
    def report_path(self) -> Path:
        return self.dir / "report.json"

    # state handling
    def _read_state(self) -> PipelineState | None:
        if not self.state_path.exists():
            return None
        payload = json.loads(self.state_path.read_text(encoding="utf-8"))
        return PipelineState(
            run_id=payload["run_id"],
            stage=payload["stage"],
            config_hash=payload["config_hash"],
            artifacts=payload.get("artifacts", {}),
        )

    def state(self) -> PipelineState:
        state = self._read_state()
        if state is None:
            return PipelineState(self.run_id, "", self.config.config_hash(), {})
        return state

    def advance(self, stage: str, **artifacts: str) -> PipelineState:
        """Record artifacts and move the stage marker forward (never back)."""
        with self._state_lock:
            state = self.state()
            merged = dict(state.artifacts)
            merged.update(artifacts)
            new_index = STAGES.index(stage)
            stage_name = stage if new_index >= state.stage_index() else state.stage
            state = PipelineState(self.run_id, stage_name, self.config.config_hash(), merged)
            payload = {
                "run_id": state.run_id,
                "stage": state.stage,
                "config_hash": state.config_hash,
                "artifacts": state.artifacts,
            }
            self.state_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            return state

    def require_stage(self, minimum: str, hint: str) -> None:
        if self.state().stage_index() < STAGES.index(minimum):
            raise StageGatingError(
                f"run {self.run_id!r} has not reached stage {minimum!r}; {hint}"
            )

    # preference store
    def append_preference(self, winner: str, loser: str, annotator: str) -> dict:
        record = {
            "winner": winner,
            "loser": loser,
            "annotator": annotator,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with self._state_lock:
            with self.preferences_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        return record

    def load_preferences(self) -> list[dict]:
        if not self.preferences_path.exists():
            return []
        records = []
        with self.preferences_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(f"invalid JSON in preference store: {e.msg}",
                                     line=lineno) from e
                if "winner" not in record or "loser" not in record:
                    raise ParseError("preference record needs winner and loser", line=lineno)
                records.append(record)
        return records

    def save_keywords(self, topic: str, keywords: list[str]) -> None:
        payload = {"topic": topic, "keywords": list(keywords)}
        self.keywords_path.write_text(json.dumps(payload, ensure_ascii=False),
                                      encoding="utf-8")

    def load_keywords(self) -> KeywordSet | None:
        if not self.keywords_path.exists():
            return None
        payload = json.loads(self.keywords_path.read_text(encoding="utf-8"))
        return KeywordSet(tuple(payload["keywords"]))

    def load_manifest(self) -> list[dict]:
        if not self.manifest_path.exists():
            raise StageGatingError("no candidates generated yet; run the candidates step")
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))["candidates"]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _load_truncated(config: PipelineConfig) -> ArticleCollection:
    if not config.corpus:
        raise ValidationError("config must name a corpus file")
    collection = load_collection(config.corpus, topic=config.topic or None)
    return truncate_collection(collection, config.truncate_k)


def _pick_l(config: PipelineConfig, n_clusters: int) -> int:
    if config.top_l > 0:
        return config.top_l
    if config.reference:
        return max(len(load_timeline(config.reference).entries), 1)
    return n_clusters


def _selected_clusters(run: Run, config: PipelineConfig):
    ranked = load_clusters(run.clusters_path)
    return select_top_l(ranked, _pick_l(config, len(ranked.clusters)))


def _cluster_source(cluster, collection: ArticleCollection) -> str:
    by_id = {a.id: a for a in collection.articles}
    return " ".join(by_id[m].text for m in cluster.members if m in by_id)


def _content_id(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Stage commands
# ---------------------------------------------------------------------------


def cmd_detect(run: Run) -> ClusterSet:
    """Embed articles, cluster, date, rank; write the cluster file."""
    config = run.config
    collection = _load_truncated(config)
    provider = build_provider(config, collection)
    vectors = {
        a.id: avg_sentence_embedding(a.text, provider) for a in collection.articles
    }
    if config.algorithm == "agglomerative":
        clusters = cluster_agglomerative(vectors, config.threshold, provider.name)
    elif config.algorithm == "markov":
        clusters = cluster_markov(vectors, config.inflation, config.max_iter, provider.name)
    else:
        raise ValidationError(f"unknown clustering algorithm {config.algorithm!r}")
    mentions = {a.id: a.date_mentions for a in collection.articles}
    dated = assign_dates(clusters, mentions)
    if not dated.clusters:
        raise ValidationError("no cluster has any date mention; cannot build a timeline")
    ranked = rank_clusters(dated, collection.date_mention_counts())
    save_clusters(ranked, run.clusters_path)
    run.advance("detected", clusters=str(run.clusters_path))
    return ranked


def cmd_candidates(run: Run, count: int | None = None) -> list[dict]:
    """Write candidate timelines: extractive, greedy, then seeded samples."""
    config = run.config
    run.require_stage("detected", "run the detect step first")
    count = count if count is not None else config.candidate_count
    if count < 1:
        raise ValidationError("candidate count must be >= 1")
    collection = _load_truncated(config)
    provider = build_provider(config, collection)
    selected = _selected_clusters(run, config)
    topic = config.topic or collection.topic

    sources = [_cluster_source(c, collection) for c in selected]
    run.candidates_dir.mkdir(exist_ok=True)

    def extractive() -> Timeline:
        summaries = []
        by_id = {a.id: a for a in collection.articles}
        for cluster, _source in zip(selected, sources):
            sentences = [s for m in cluster.members for s in by_id[m].sentences]
            embeddings = [provider.embed_sentence(s) for s in sentences]
            text = centroid_opt(sentences, embeddings, config.centroid_budget,
                                centroid=cluster.centroid)
            summaries.append(_summary_for(cluster, text))
        return assemble_timeline([s for s in summaries if s is not None], topic)

    def greedy() -> Timeline:
        summaries = []
        for cluster, source in zip(selected, sources):
            policy = policy_init_from_cluster(source)
            summaries.append(generate_event_summary(
                policy, cluster, "greedy", config.max_summary_tokens))
        return assemble_timeline(summaries, topic)

    def sampled(index: int) -> Timeline:
        summaries = []
        for ci, (cluster, source) in enumerate(zip(selected, sources)):
            policy = policy_init_from_cluster(source)
            rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, _CANDIDATE_STREAM, index, ci])
            )
            ids, _ = policy.sample(rng, config.max_summary_tokens)
            text = detokenize(policy.decode(ids))
            summaries.append(_summary_for(cluster, text))
        return assemble_timeline([s for s in summaries if s is not None], topic)

    manifest = []
    for i in range(count):
        if i == 0:
            timeline, mode = extractive(), "centroid-extractive"
        elif i == 1:
            timeline, mode = greedy(), "policy-greedy"
        else:
            timeline, mode = sampled(i), f"policy-sample-{i}"
        path = run.candidates_dir / f"cand_{i}.jsonl"
        save_timeline(timeline, path)
        manifest.append({"id": _content_id(path), "file": path.name, "mode": mode})

    run.manifest_path.write_text(
        json.dumps({"topic": topic, "candidates": manifest}, indent=2), encoding="utf-8"
    )
    run.advance("candidates", candidates=str(run.candidates_dir))
    return manifest


def _summary_for(cluster, text: str):
    if not text.strip():
        return None
    return EventSummary.from_text(cluster.assigned_date, text)


def _candidate_items(run: Run, provider) -> dict[str, np.ndarray]:
    """Embed every candidate timeline, keyed by its content id."""
    items = {}
    for entry in run.load_manifest():
        timeline = load_timeline(run.candidates_dir / entry["file"])
        items[entry["id"]] = timeline_embedding(timeline, provider)
    return items


def cmd_learn_reward(run: Run) -> tuple:
    """Fit the preference model on stored pairs and calibrate the reward."""
    config = run.config
    run.require_stage("candidates", "generate candidates and collect preferences first")
    records = run.load_preferences()
    if not records:
        raise ValidationError(
            "no preferences recorded; run `chronoline serve` and submit "
            "comparisons before learning the reward"
        )
    collection = _load_truncated(config)
    provider = build_provider(config, collection)
    items = _candidate_items(run, provider)
    pairs = []
    for record in records:
        if record["winner"] not in items or record["loser"] not in items:
            raise ValidationError(
                f"preference references unknown candidate {record['winner']!r}/"
                f"{record['loser']!r}; store and candidates are out of sync"
            )
        pairs.append(PreferencePair(record["winner"], record["loser"]))
    keywords = run.load_keywords()
    if config.w > 0 and (keywords is None or len(keywords) == 0):
        raise ValidationError(
            "keyword weight w > 0 but no keywords recorded; POST /keywords "
            "during the serve step or set w=0"
        )

    dataset = PreferenceDataset(items, tuple(pairs))
    model = fit_gppl(dataset, GpplConfig())
    save_score_model(model, run.score_model_path)

    lm = ngram_lm_fit(collection, config.lm_order, config.lm_discount)
    alpha = config.alpha or calibrate_alpha(lm, [a.text for a in collection.articles])
    reward_config = config.reward_config(alpha)
    save_reward_config(reward_config, run.reward_config_path)

    run.advance("reward-learned", score_model=str(run.score_model_path),
                reward_config=str(run.reward_config_path))
    return model, reward_config


def _reward_context(run: Run, config: PipelineConfig, collection, provider,
                    source_text: str, reward_config: RewardConfig) -> RewardContext:
    keywords = run.load_keywords()
    if keywords is not None and reward_config.gamma1 > 0 and reward_config.w > 0:
        keywords = keywords.with_embeddings(provider)
    model = None
    if reward_config.gamma1 > 0 and reward_config.w < 1:
        model = load_score_model(run.score_model_path)
    lm = None
    if reward_config.gamma3 > 0:
        lm = ngram_lm_fit(collection, config.lm_order, config.lm_discount)
    source_emb = None
    if reward_config.gamma2 > 0:
        source_emb = avg_sentence_embedding(source_text, provider)
    return RewardContext(config=reward_config, provider=provider, keywords=keywords,
                         model=model, source_emb=source_emb, lm=lm)


def _ablated(reward_config: RewardConfig, no_r1: bool, no_r2: bool, no_r3r4: bool) -> RewardConfig:
    updates = {}
    if no_r1:
        updates["gamma1"] = 0.0
    if no_r2:
        updates["gamma2"] = 0.0
    if no_r3r4:
        updates["gamma3"] = 0.0
        updates["gamma4"] = 0.0
    return replace(reward_config, **updates) if updates else reward_config


def cmd_train(run: Run, no_r1: bool = False, no_r2: bool = False,
              no_r3r4: bool = False) -> list[Path]:
    """Fine-tune on every selected cluster in rank order, checkpointing each.

    The default trains one shared policy whose vocabulary spans all selected
    clusters; per_cluster_policy switches to an independent policy per
    cluster.  Existing checkpoints for the same config resume the loop at
    the next unvisited cluster.
    """
    config = run.config
    run.require_stage("reward-learned", "run the learn-reward step first")
    collection = _load_truncated(config)
    provider = build_provider(config, collection)
    selected = _selected_clusters(run, config)
    reward_config = _ablated(load_reward_config(run.reward_config_path),
                             no_r1, no_r2, no_r3r4)
    train_config = config.train_config()
    run.checkpoints_dir.mkdir(exist_ok=True)

    sources = [_cluster_source(c, collection) for c in selected]
    shared_policy = None
    if not config.per_cluster_policy:
        shared_policy = policy_init_from_cluster(" ".join(sources))

    checkpoint_paths = []
    policy = shared_policy
    critic = None
    actor_opt = None
    critic_opt = None
    for index, (cluster, source) in enumerate(zip(selected, sources)):
        cluster_id = cluster.assigned_date.isoformat()
        path = run.checkpoints_dir / f"cluster_{index}.json"
        checkpoint_paths.append(path)
        if path.exists():
            # already visited under this config; reload so later clusters
            # continue from the recorded parameters
            policy, critic, actor_opt, critic_opt, _, _ = load_checkpoint(
                path, train_config
            )
            continue
        if config.per_cluster_policy:
            policy = policy_init_from_cluster(source)
            critic = Critic(provider.dim)
            actor_opt = None
            critic_opt = None
        context = _reward_context(run, config, collection, provider, source,
                                  reward_config)
        if actor_opt is None and policy is not None:
            actor_opt = AdamW({"unigram": policy.unigram_logits,
                               "bigram": policy.bigram_logits},
                              train_config.actor_lr, train_config.adam_betas,
                              train_config.adam_eps, train_config.weight_decay)
        if critic is None:
            critic = Critic(provider.dim)
        if critic_opt is None:
            critic_opt = AdamW({"weights": critic.weights, "bias": critic.bias},
                               train_config.critic_lr, train_config.adam_betas,
                               train_config.adam_eps, train_config.weight_decay)
        try:
            policy, critic, log = train_on_cluster(
                source, context, train_config, cluster_id=cluster_id,
                cluster_index=index, policy=policy, critic=critic,
                actor_opt=actor_opt, critic_opt=critic_opt,
            )
        except Exception as e:
            e.args = (f"cluster {cluster_id}: {e}",)
            raise
        save_training_log(log, run.training_log_path)
        save_checkpoint(path, train_config, policy, critic, actor_opt, critic_opt,
                        cluster_id, train_config.episodes_per_cluster)

    run.advance("trained", checkpoints=str(run.checkpoints_dir),
                training_log=str(run.training_log_path))
    return checkpoint_paths


def cmd_generate_and_evaluate(run: Run, ref_path: str | None = None,
                              zero_shot: bool = False) -> tuple[Timeline, MetricReport | None]:
    """Greedy generation per cluster, assembly, optional reference scoring."""
    config = run.config
    if zero_shot:
        run.require_stage("detected", "run the detect step first")
    else:
        run.require_stage("trained", "train first or pass --zero-shot")
    collection = _load_truncated(config)
    provider = build_provider(config, collection)
    selected = _selected_clusters(run, config)
    sources = [_cluster_source(c, collection) for c in selected]
    train_config = config.train_config()

    summaries = []
    shared_policy = None
    if zero_shot and not config.per_cluster_policy:
        shared_policy = policy_init_from_cluster(" ".join(sources))
    for index, (cluster, source) in enumerate(zip(selected, sources)):
        if zero_shot:
            policy = shared_policy if shared_policy is not None \
                else policy_init_from_cluster(source)
        elif config.per_cluster_policy:
            policy, _, _, _, _, _ = load_checkpoint(
                run.checkpoints_dir / f"cluster_{index}.json", train_config
            )
        else:
            if shared_policy is None:
                last = run.checkpoints_dir / f"cluster_{len(selected) - 1}.json"
                shared_policy = load_checkpoint(last, train_config)[0]
            policy = shared_policy
        summaries.append(generate_event_summary(
            policy, cluster, "greedy", config.max_summary_tokens))

    timeline = assemble_timeline(summaries, config.topic or collection.topic)
    save_timeline(timeline, run.timeline_path)
    run.advance("generated", timeline=str(run.timeline_path))

    report = None
    reference = ref_path or config.reference
    if reference:
        ref = load_timeline(reference)
        report = evaluate_timeline(timeline, ref, provider)
        run.report_path.write_text(report.to_json(), encoding="utf-8")
    return timeline, report


# ---------------------------------------------------------------------------
# Annotation service
# ---------------------------------------------------------------------------


class AnnotationService:
    """Pairwise-comparison tasks over the run's candidates.

    Tasks are every unordered candidate pair in manifest order; a task is
    answered once the preference store holds a pair over the same two
    candidate ids, so restarting the server never loses progress.
    """

    def __init__(self, run: Run):
        run.require_stage("candidates", "generate candidates before serving annotation")
        self.run = run
        manifest = run.load_manifest()
        self.topic = json.loads(run.manifest_path.read_text(encoding="utf-8"))["topic"]
        self.candidates = {entry["id"]: entry for entry in manifest}
        ids = [entry["id"] for entry in manifest]
        self.tasks = [
            {"task_id": f"{i}v{j}", "left": ids[i], "right": ids[j]}
            for i in range(len(ids))
            for j in range(i + 1, len(ids))
        ]
        self._lock = threading.Lock()

    def _answered_keys(self) -> set[frozenset]:
        return {
            frozenset((r["winner"], r["loser"])) for r in self.run.load_preferences()
        }

    def _task_by_id(self, task_id: str) -> dict | None:
        for task in self.tasks:
            if task["task_id"] == task_id:
                return task
        return None

    def _timeline_payload(self, candidate_id: str) -> dict:
        entry = self.candidates[candidate_id]
        timeline = load_timeline(self.run.candidates_dir / entry["file"])
        return {
            "id": candidate_id,
            "entries": [
                {"date": e.date.isoformat(), "summary": e.text} for e in timeline.entries
            ],
        }

    def next_task(self) -> dict | None:
        answered = self._answered_keys()
        for task in self.tasks:
            if frozenset((task["left"], task["right"])) not in answered:
                return {
                    "task_id": task["task_id"],
                    "topic": self.topic,
                    "left": self._timeline_payload(task["left"]),
                    "right": self._timeline_payload(task["right"]),
                    "status": "pending",
                }
        return None

    def record_choice(self, task_id: str, winner_side: str, annotator: str) -> dict:
        task = self._task_by_id(task_id)
        if task is None:
            raise KeyError(task_id)
        if winner_side not in ("left", "right"):
            raise ValidationError('winner must be "left" or "right"')
        with self._lock:
            if frozenset((task["left"], task["right"])) in self._answered_keys():
                raise FileExistsError(task_id)  # mapped to 409 by the handler
            winner = task[winner_side]
            loser = task["right"] if winner_side == "left" else task["left"]
            record = self.run.append_preference(winner, loser, annotator)
        self.run.advance("preferences-collected")
        return record

    def record_keywords(self, topic: str, keywords: list[str]) -> int:
        cleaned = [k.strip() for k in keywords if isinstance(k, str) and k.strip()]
        if not cleaned:
            raise ValidationError("keywords list is empty")
        self.run.save_keywords(topic or self.topic, cleaned)
        return len(cleaned)

    def status(self) -> dict:
        state = self.run.state()
        answered = self._answered_keys()
        done = sum(
            1 for t in self.tasks if frozenset((t["left"], t["right"])) in answered
        )
        keywords = self.run.load_keywords()
        return {
            "run_id": self.run.run_id,
            "stage": state.stage,
            "topic": self.topic,
            "candidates": len(self.candidates),
            "tasks_total": len(self.tasks),
            "tasks_answered": done,
            "pairs": len(self.run.load_preferences()),
            "keywords": 0 if keywords is None else len(keywords),
        }


_CHOICE_RX = re.compile(r"^/tasks/([^/]+)/choice$")


class _AnnotationHandler(BaseHTTPRequestHandler):
    service: AnnotationService = None
    static_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ValidationError(f"request body is not valid JSON: {e}") from e
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        return body

    def _serve_static(self, path: str) -> bool:
        if self.static_dir is None:
            return False
        name = "index.html" if path in ("/", "") else path.lstrip("/")
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return False
        content_types = {".html": "text/html", ".js": "text/javascript",
                         ".css": "text/css", ".map": "application/json"}
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self):  # noqa: N802 - stdlib handler naming
        try:
            if self.path == "/tasks/next":
                task = self.service.next_task()
                self._send(200, {"task": task})
            elif self.path == "/status":
                self._send(200, self.service.status())
            elif self._serve_static(self.path):
                pass
            else:
                self._send(404, {"error": f"unknown path {self.path}"})
        except Exception as e:  # noqa: BLE001 - report, keep serving
            self._send(500, {"error": str(e)})

    def do_POST(self):  # noqa: N802
        try:
            match = _CHOICE_RX.match(self.path)
            if match:
                body = self._read_json()
                record = self.service.record_choice(
                    match.group(1), body.get("winner", ""),
                    str(body.get("annotator", "anonymous")),
                )
                self._send(200, {"recorded": True, "winner": record["winner"],
                                 "loser": record["loser"]})
            elif self.path == "/keywords":
                body = self._read_json()
                count = self.service.record_keywords(
                    str(body.get("topic", "")), body.get("keywords", [])
                )
                self._send(200, {"recorded": True, "count": count})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})
        except KeyError as e:
            self._send(404, {"error": f"unknown task {e}"})
        except FileExistsError as e:
            self._send(409, {"error": f"task {e} already answered; store unchanged"})
        except ValidationError as e:
            self._send(400, {"error": str(e)})
        except Exception as e:  # noqa: BLE001
            self._send(500, {"error": str(e)})


def serve_annotation(run: Run, host: str = "127.0.0.1", port: int = 8080,
                     static_dir: str | Path | None = None) -> ThreadingHTTPServer:
    """Build the HTTP server; the caller decides when to serve_forever()."""
    service = AnnotationService(run)
    static = static_dir or run.config.static_dir or None
    handler = type(
        "BoundAnnotationHandler",
        (_AnnotationHandler,),
        {"service": service, "static_dir": Path(static) if static else None},
    )
    return ThreadingHTTPServer((host, port), handler)

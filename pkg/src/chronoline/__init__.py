"""Timeline summarisation with preference-learned rewards.

Pipeline: cluster dated articles into events, elicit pairwise preferences
over candidate timelines, learn a latent quality score from them, and
fine-tune a per-cluster summarisation policy against a compound reward.
"""

__version__ = "0.1.0"

from .corpus import (
    Article,
    ArticleCollection,
    DayStamp,
    EventSummary,
    KeywordSet,
    Timeline,
    extract_date_mentions,
    extract_keywords_tfidf,
    load_collection,
    load_timeline,
    save_timeline,
    split_sentences,
    tokenize,
    truncate_article,
)
from .embedding import (
    avg_sentence_embedding,
    cosine_similarity,
    hashed_embedding_provider,
    remote_embedding_provider,
    tfidf_fit,
    timeline_embedding,
)
from .event_detection import (
    ClusterSet,
    EventCluster,
    assign_cluster_date,
    cluster_agglomerative,
    cluster_markov,
    rank_clusters,
    select_top_l,
)
from .gppl import (
    GpplConfig,
    PreferenceDataset,
    PreferencePair,
    ScoreModel,
    fit_gppl,
    pairs_from_ranking,
    pairwise_probability,
    predict_score,
    win_probability,
)
from .reward import (
    RewardBreakdown,
    RewardConfig,
    RewardContext,
    calibrate_alpha,
    compound_reward,
    consistency_reward,
    language_quality_reward,
    ngram_lm_fit,
    preference_reward,
    repetition_penalty,
)
from .rl import (
    AdamW,
    Critic,
    TrainConfig,
    Trajectory,
    actor_update,
    compute_advantages,
    compute_returns,
    critic_update,
    sample_trajectory,
    score_trajectory,
    train_on_cluster,
)
from .summarise import (
    TokenPolicy,
    assemble_timeline,
    centroid_opt,
    generate_event_summary,
    policy_init_from_cluster,
)
from .evaluate import (
    MetricReport,
    alignment_rouge,
    date_f1,
    evaluate_timeline,
    rouge_n,
    soft_token_f1,
)
from .pipeline import (
    PipelineConfig,
    Run,
    cmd_candidates,
    cmd_detect,
    cmd_generate_and_evaluate,
    cmd_learn_reward,
    cmd_train,
    parse_config,
    serve_annotation,
)

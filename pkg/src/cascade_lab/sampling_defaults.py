"""Default sizes and seed of the acceptance configuration."""

DEFAULTS = {
    "seed": 7,
    "b": 3,
    "a": 0.7,
    "pool_size": 100_000,
    "rounds": 20,
    "clt_samples": 10_000,
    "cov_replicas": 20_000,
    "zeta_fields": 20_000,
    "eps": 0.1,
}

from ._core import (
    ClusterlessError,
    Config,
    Run,
    Schedule,
    __version__,
    export_run,
    is_alive,
    load_schedule,
    make_schedule,
    remote_completion,
    run,
    run_experiment,
    serving_time,
    transfer_delay,
    zipf_pmf,
)

STRATEGIES = ("CLU", "NKS", "CLI", "RRX", "RNX")
REGIMES = ("uniform", "skewed", "dynamic")

from ._htr import (
    Env,
    EnvSpec,
    TaskDescriptor,
    Transition,
    dense_reward,
    kl_to_prior,
    product_of_gaussians,
    relabel_transition,
    run_training,
    sample_tasks,
    sparse_reward,
    state_to_task,
)

__all__ = [
    "Env",
    "EnvSpec",
    "TaskDescriptor",
    "Transition",
    "dense_reward",
    "kl_to_prior",
    "product_of_gaussians",
    "relabel_transition",
    "run_training",
    "sample_tasks",
    "sparse_reward",
    "state_to_task",
]

from src.psd_psro.policy import BehavioralPolicy, pure_policy


def rps_pure(game, player, label):
    return pure_policy(game, player, {"row" if player == 1 else "col": label})


def kuhn_equilibrium(game):
    """The alpha = 0 member of Kuhn poker's equilibrium family (value -1/18)."""
    p1 = BehavioralPolicy.from_mapping(game, 1, {
        "J/": [1.0, 0.0], "Q/": [1.0, 0.0], "K/": [1.0, 0.0],
        "J/pb": [1.0, 0.0], "Q/pb": [2 / 3, 1 / 3], "K/pb": [0.0, 1.0],
    })
    p2 = BehavioralPolicy.from_mapping(game, 2, {
        "J/b": [1.0, 0.0], "Q/b": [2 / 3, 1 / 3], "K/b": [0.0, 1.0],
        "J/p": [2 / 3, 1 / 3], "Q/p": [1.0, 0.0], "K/p": [0.0, 1.0],
    })
    return p1, p2

"""Index layout of the counter arrays shared by both kernel backends."""

# integer tallies
T_OFFERED = 0  # provider turns (one per game)
T_FORWARDS = 1
T_DELIVERED = 2
T_STRAT_EVENTS = 3
T_ADOPTIONS = 4
T_REWIRE_ATTEMPTS = 5
T_BREAKS = 6
T_CANCELLED = 7
T_GAMES_FF = 8  # participant-games per strategy, FF/FD/DD consecutive
N_TALLY = 11

# float tallies
F_GAINS = 0
F_COSTS = 1
F_PAY_FF = 2  # payoff received per strategy, FF/FD/DD consecutive
N_FTALLY = 5

# ODE field modes and terminal labels
MODE_USS = 0
MODE_SS = 1
LABEL_NONE = -1
LABEL_NONFINITE = -2

# kernel status codes
OK = 0
ERR_CAPACITY = 1

#include "lbsim/metrics.hpp"

#include <cmath>

namespace lbsim {

Metrics compute_metrics(const Graph& g, const LoadVector& loads) {
    Metrics m;
    m.l_max = loads[0];
    m.l_min = loads[0];
    Rational sum = 0;
    for (NodeId u = 0; u < g.node_count(); ++u) {
        const Rational& l = loads[u];
        if (l > m.l_max) m.l_max = l;
        if (l < m.l_min) m.l_min = l;
        sum += l;
    }
    m.l_avg = sum / g.node_count();
    m.discrepancy = m.l_max - m.l_min;
    m.potential = 0;
    for (NodeId u = 0; u < g.node_count(); ++u) {
        const Rational d = loads[u] - m.l_avg;
        m.potential += d * d;
    }
    m.max_local_diff = 0;
    for (const auto& [u, v] : g.edges()) {
        Rational d = loads[u] - loads[v];
        if (d < 0) d = -d;
        if (d > m.max_local_diff) m.max_local_diff = d;
    }
    return m;
}

bool is_eps_balanced(const Graph& g, const LoadVector& loads, const Rational& eps) {
    for (const auto& [u, v] : g.edges()) {
        Rational d = loads[u] - loads[v];
        if (d < 0) d = -d;
        if (d > eps) {
            return false;
        }
    }
    return true;
}

bool is_fair_transfer(const Rational& load_u, const Rational& load_v, const Rational& amount) {
    return load_u - load_v >= 2 * amount;
}

CheckResult check_monotonic_step(const Graph& g, const LoadVector& before, const LoadVector& after,
                                 const std::vector<Transfer>& transfers, TransferRule rule) {
    CheckResult res;
    auto flag = [&](std::string what) { res.violations.push_back(std::move(what)); };

    if (before.size() != g.node_count() || after.size() != g.node_count()) {
        flag("load vector size mismatch");
        return res;
    }
    for (const Transfer& t : transfers) {
        if (rule == TransferRule::Unchecked) {
            break;
        }
        if (t.amount <= 0) {
            flag("transfer " + std::to_string(t.from) + "->" + std::to_string(t.to) + " has non-positive amount");
            continue;
        }
        if (!(before[t.from] > before[t.to])) {
            flag("transfer " + std::to_string(t.from) + "->" + std::to_string(t.to) +
                 " not from strictly higher to strictly lower load");
        }
        if (rule == TransferRule::FairPairwise) {
            if (!is_fair_transfer(before[t.from], before[t.to], t.amount)) {
                flag("unfair transfer " + std::to_string(t.from) + "->" + std::to_string(t.to) + " of " +
                     to_fraction_string(t.amount));
            }
            if (after[t.to] > after[t.from]) {
                flag("receiver " + std::to_string(t.to) + " ended above donor " + std::to_string(t.from));
            }
        }
    }

    const Metrics mb = compute_metrics(g, before);
    const Metrics ma = compute_metrics(g, after);
    if (ma.l_max > mb.l_max) {
        flag("L_max increased: " + to_fraction_string(mb.l_max) + " -> " + to_fraction_string(ma.l_max));
    }
    if (ma.l_min < mb.l_min) {
        flag("L_min decreased: " + to_fraction_string(mb.l_min) + " -> " + to_fraction_string(ma.l_min));
    }
    Rational sum_before = 0;
    Rational sum_after = 0;
    for (NodeId u = 0; u < g.node_count(); ++u) {
        sum_before += before[u];
        sum_after += after[u];
        if (after[u] < 0) {
            flag("negative load at node " + std::to_string(u));
        }
    }
    if (sum_before != sum_after) {
        flag("load sum not conserved: " + to_fraction_string(sum_before) + " -> " + to_fraction_string(sum_after));
    }
    return res;
}

namespace {

// ln of a positive mpz via mantissa/exponent split; exact enough that the
// guard below dominates any representation error.
long double ln_mpz(const mpz_class& m) {
    signed long exp = 0;
    const double mant = mpz_get_d_2exp(&exp, m.get_mpz_t());
    return std::log(static_cast<long double>(mant)) + static_cast<long double>(exp) * 0.6931471805599453094L;
}

std::int64_t ceil_with_guard(long double x) {
    // Round the argument up by a hair so the ceiling never lands short.
    return static_cast<std::int64_t>(std::ceil(x * (1.0L + 1e-15L) + 1e-12L));
}

}  // namespace

BoundBudget bound_budget(NodeId n, int diameter, const Rational& k, const Rational& eps, LoadMode mode) {
    if (n < 2 || diameter < 1 || k < 0) {
        throw InvalidParameter("bound_budget: need n >= 2, D >= 1, K >= 0");
    }
    BoundBudget b;
    if (k == 0) {
        return b;
    }
    const Rational k2 = k * k;

    if (mode == LoadMode::Continuous) {
        if (eps <= 0) {
            throw InvalidParameter("bound_budget: continuous mode needs eps > 0");
        }
        // ceil(n K^2 / (eps^2 / 2)) = ceil(2 n K^2 / eps^2)
        const Rational arg = Rational(2 * n) * k2 / (eps * eps);
        const mpz_class m = ceil_div(arg.get_num(), arg.get_den());
        if (m > 1) {
            const long double ln = ln_mpz(m);
            b.continuous_rounds = ceil_with_guard(static_cast<long double>(6 * n + 3) * diameter * ln);
        }
    } else {
        // ceil(n K^2 / (2 D^2)); the theorem statement's D^2/2 denominator is
        // the same quantity.
        const Rational arg = Rational(n) * k2 / Rational(2 * static_cast<long>(diameter) * diameter);
        const mpz_class m = ceil_div(arg.get_num(), arg.get_den());
        std::int64_t log_part = 0;
        if (m > 1) {
            const long double ln = ln_mpz(m);
            log_part = ceil_with_guard(static_cast<long double>(24 * n + 3) * diameter * ln);
        }
        b.discrete_rounds = log_part + static_cast<std::int64_t>(6) * n * diameter * diameter;
    }
    return b;
}

Rational lemma2_floor(const Rational& k, int diameter) { return k * k / Rational(2 * diameter); }

Rational lemma6_floor(const Rational& k, int diameter) { return k * k / Rational(8 * diameter); }

}  // namespace lbsim

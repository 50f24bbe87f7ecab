#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>

namespace lbsim {

/// Exact arbitrary-precision rational. All load values, potentials and
/// lemma floors are computed in this type so conservation and per-round
/// potential-drop checks are equality-exact, never tolerance-based.
using Rational = mpq_class;

inline bool is_integral(const Rational& r) {
    return mpz_cmp_ui(r.get_den().get_mpz_t(), 1) == 0;
}

/// "p" when the denominator is 1, "p/q" otherwise.
inline std::string to_fraction_string(const Rational& r) {
    if (is_integral(r)) {
        return r.get_num().get_str();
    }
    return r.get_num().get_str() + "/" + r.get_den().get_str();
}

/// Accepts "p" or "p/q" with optional sign; rejects everything else.
std::optional<Rational> parse_rational(const std::string& text);

/// Requires an integral value that fits in int64.
std::int64_t to_int64(const Rational& r);

/// ceil(num/den) for a positive denominator.
inline mpz_class ceil_div(const mpz_class& num, const mpz_class& den) {
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
    return q;
}

}  // namespace lbsim

#include "treecipher/analytics.hpp"

#include <stdexcept>

namespace treecipher {

BigInt big_factorial(int n) {
    BigInt r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

BigInt a_n(int n) {
    if (n < 1) throw std::invalid_argument("a_n requires n >= 1");
    BigInt a = 0;
    for (int k = 2; k <= n; ++k) a = k * (1 + a);
    return a;
}

BigInt a_pq(int p, int q) {
    if (p < 1 || q < 1) throw std::invalid_argument("a_pq requires p, q >= 1");
    int lo = std::min(p, q), hi = std::max(p, q);
    return a_n(lo) + big_factorial(lo) * a_n(hi);
}

namespace {

void check_tuple(const ModelTuple& t) {
    if (t.n < 2 || t.alpha < 1)
        throw std::invalid_argument("model tuples require n >= 2 and alpha >= 1");
}

}  // namespace

BigInt f_variadic(const TupleSeq& seq) {
    if (seq.empty()) throw std::invalid_argument("f requires at least one tuple");
    for (const auto& t : seq) check_tuple(t);
    BigInt acc = 0;
    for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
        if (it == seq.rbegin())
            acc = it->alpha * a_n(it->n);
        else
            acc = it->alpha * (a_n(it->n) + big_factorial(it->n) * acc);
    }
    return acc;
}

BigInt delta_f(int m, int n, int alpha, int beta) {
    if (m < 2 || n < 2 || alpha < 1 || beta < 1)
        throw std::invalid_argument("delta_f requires m, n >= 2 and alpha, beta >= 1");
    return beta * a_n(n) * (alpha * big_factorial(m) - 1) -
           alpha * a_n(m) * (beta * big_factorial(n) - 1);
}

BigInt state_bound(const BigInt& n_after_deductions) {
    if (n_after_deductions < 1) throw std::invalid_argument("state_bound requires N >= 1");
    return (n_after_deductions * 2437 + 708) / 709;
}

TupleSeq optimal_order(TupleSeq seq) {
    for (const auto& t : seq) check_tuple(t);
    bool swapped = true;
    while (swapped) {
        swapped = false;
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            if (delta_f(seq[i].n, seq[i + 1].n, seq[i].alpha, seq[i + 1].alpha) > 0) {
                std::swap(seq[i], seq[i + 1]);
                swapped = true;
            }
        }
    }
    return seq;
}

BigInt tuple_system_space(const TupleSeq& seq) {
    BigInt r = 1;
    for (const auto& t : seq) r *= t.alpha * big_factorial(t.n);
    return r;
}

}  // namespace treecipher

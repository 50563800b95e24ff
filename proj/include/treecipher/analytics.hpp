#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <utility>
#include <vector>

namespace treecipher {

using BigInt = boost::multiprecision::cpp_int;

BigInt big_factorial(int n);

/// Size of the permutation enumeration tree: a_1 = 0, a_n = n(1 + a_{n-1}).
BigInt a_n(int n);

/// Optimal nested enumeration of two pairs: a_min + min! * a_max.
BigInt a_pq(int p, int q);

/// (size, repetition) tuple of the backtracking-tree model; n >= 2, alpha >= 1.
struct ModelTuple {
    int n = 2;
    int alpha = 1;
    bool operator==(const ModelTuple&) const = default;
};
using TupleSeq = std::vector<ModelTuple>;

/// Variadic model of the backtracking-tree size:
///   f((n, a))          = a * a_n
///   f((n, a), rest...) = a * (a_n + n! * f(rest...))
BigInt f_variadic(const TupleSeq& seq);

/// f((m,alpha),(n,beta),rest) - f((n,beta),(m,alpha),rest); independent of rest.
/// Equals beta*a_n*(alpha*m! - 1) - alpha*a_m*(beta*n! - 1).
BigInt delta_f(int m, int n, int alpha, int beta);

/// Upper bound on backtracking states for a post-deduction space of size N:
/// smallest integer >= N * 2437/709, an over-approximation of 2(e-1)*N.
BigInt state_bound(const BigInt& n_after_deductions);

/// Processing order minimizing f: bubble sort swapping adjacent tuples
/// whenever delta_f of the pair is positive.
TupleSeq optimal_order(TupleSeq seq);

/// Search-space size of a tuple system: product of alpha_i * n_i!.
BigInt tuple_system_space(const TupleSeq& seq);

}  // namespace treecipher

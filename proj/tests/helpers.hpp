#pragma once

#include <string>

#include "treecipher/synthgen.hpp"
#include "treecipher/tree.hpp"

namespace helpers {

using treecipher::LabeledTree;

inline const char* kExampleTree = "0(1(2(3,4),4(9,16),3(3,4)),2(4(6,8),8(18,32),6(6,8)))";
inline const char* kDoublingT1 = "1(2(3,4),4(9,16),3(3,4))";
inline const char* kDoublingT2 = "2(4(6,8),8(18,32),6(6,8))";
inline const char* kRunningT1 = "B(B,A(A,B),A(C,C),B(C,D,E),A(D,E,C))";
inline const char* kRunningT2 =
    "beta(beta,alpha(gamma,gamma),alpha(beta,alpha),alpha(gamma,delta,eta),beta(eta,delta,"
    "gamma))";
inline const char* kLocalGrowth = "A(A(C,D,E,F),B(C,D,E,F),B)";

inline LabeledTree tree(const std::string& text) { return treecipher::parse_tree(text); }

inline LabeledTree random_tree(int n, double p, std::uint64_t seed) {
    treecipher::GenSpec spec{n, p, seed, treecipher::PairKind::Single};
    return treecipher::gen_tree(spec);
}

}  // namespace helpers

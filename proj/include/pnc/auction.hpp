// Copyright 2026 The pnc-risk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PNC_AUCTION_HPP
#define PNC_AUCTION_HPP

// First-mover auction: every agent bids for the right to move first; the
// winner pays its bid, split equally among the others, then plays position 0
// of the price-and-choose mechanism.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/mechanism.hpp"
#include "pnc/types.hpp"

namespace pnc {

/// W_max minus the sum of every agent's own grid average.
template <typename Scalar>
Scalar efficient_surplus(const Mechanism<Scalar>& mech) {
  return mech.welfare_argmax().second - mech.averages().sum();
}

/// Symmetric equilibrium bid (n-1) eta / n. Negative surpluses inside the
/// 1e-12 rounding band count as zero.
template <typename Scalar>
Scalar equilibrium_bid(Scalar eta, Index n) {
  if (n < 2) throw ParameterError("auction needs at least two bidders");
  if (eta < -kExactTol<Scalar>) throw DomainError("efficient surplus is negative; the grid cannot support the auction");
  return Scalar(n - 1) * std::max(eta, Scalar(0)) / Scalar(n);
}

template <typename Scalar>
struct AuctionOutcome {
  Vector<Scalar> bids;
  Index winner = 0;
  Vector<Scalar> transfers;
  std::uint64_t seed = 0;
};

template <typename Scalar>
Vector<Scalar> auction_transfers(const Vector<Scalar>& bids, Index winner) {
  const Index n = bids.size();
  Vector<Scalar> t = Vector<Scalar>::Constant(n, bids(winner) / Scalar(n - 1));
  t(winner) = -bids(winner);
  return t;
}

template <typename Scalar>
std::vector<Index> highest_bidders(const Vector<Scalar>& bids) {
  std::vector<Index> out;
  const Scalar best = bids.maxCoeff();
  for (Index i = 0; i < bids.size(); ++i)
    if (bids(i) == best) out.push_back(i);
  return out;
}

/// Uniform draw from the tie set. mt19937_64's output sequence is fixed by
/// the standard, so the draw is reproducible across platforms.
inline Index draw_winner(const std::vector<Index>& ties, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ties[rng() % ties.size()];
}

/// Mechanism order with `first` in position 0 and everyone else in index order.
inline std::vector<Index> order_with_first(Index n, Index first) {
  std::vector<Index> order{first};
  for (Index i = 0; i < n; ++i)
    if (i != first) order.push_back(i);
  return order;
}

template <typename Scalar>
struct CombinedRun {
  AuctionOutcome<Scalar> auction;
  Transcript<Scalar> transcript;  // exact mode, winner first
  Scalar surplus = 0;
  Vector<Scalar> averages;        // own-evaluator grid averages
  Vector<Scalar> final_payoffs;   // mechanism payoff + auction transfer
  Vector<Scalar> expected;        // averages + eta / n
  Matrix<Scalar> by_winner;       // row w: final payoffs had w won
};

/// Auction followed by the exact mechanism with the winner moving first.
template <typename Scalar>
CombinedRun<Scalar> run_auction_then_pnc(const Mechanism<Scalar>& mech, std::uint64_t seed) {
  const Index n = mech.agents();
  CombinedRun<Scalar> out;
  out.surplus = efficient_surplus(mech);
  out.averages = mech.averages();
  const Scalar bid = equilibrium_bid(out.surplus, n);
  out.auction.bids = Vector<Scalar>::Constant(n, bid);
  out.auction.seed = seed;
  out.auction.winner = draw_winner(highest_bidders(out.auction.bids), seed);
  out.auction.transfers = auction_transfers(out.auction.bids, out.auction.winner);

  out.by_winner.resize(n, n);
  for (Index w = 0; w < n; ++w) {
    auto t = run_pnc(mech, PncOptions{}, order_with_first(n, w));
    out.by_winner.row(w) = (t.payoffs + auction_transfers(out.auction.bids, w)).transpose();
    if (w == out.auction.winner) out.transcript = std::move(t);
  }
  out.final_payoffs = out.by_winner.row(out.auction.winner).transpose();
  out.expected = (out.averages.array() + out.surplus / Scalar(n)).matrix();
  return out;
}

template <typename Scalar>
struct BidAudit {
  Vector<Scalar> equilibrium;  // expected payoff per agent with everyone at b*
  std::optional<Scalar> max_gain;
  Index agent_at_max = -1;
  Scalar bid_at_max = 0;
  Index evaluated = 0;
};

/// 101 evenly spaced bids on [0, eta] plus b* and b* +- offset.
template <typename Scalar>
std::vector<Scalar> default_bid_grid(Scalar eta, Index n, Index points = 101, Scalar offset = Scalar(1e-3)) {
  std::vector<Scalar> grid;
  const Scalar top = std::max(eta, Scalar(0));
  for (Index k = 0; k < points; ++k)
    grid.push_back(points > 1 ? top * Scalar(k) / Scalar(points - 1) : Scalar(0));
  const Scalar b = equilibrium_bid(eta, n);
  for (Scalar v : {b, b + offset, std::max(Scalar(0), b - offset)}) grid.push_back(v);
  return grid;
}

/// Unilateral deviations from the symmetric bid profile. Expected payoffs are
/// exact: the winner is uniform on the tie set, and each branch's payoff is
/// the mechanism payoff with that winner first plus the auction transfer.
template <typename Scalar>
BidAudit<Scalar> audit_bid_deviation(const Mechanism<Scalar>& mech, const std::vector<Scalar>& bid_grid) {
  const Index n = mech.agents();
  const Scalar eta = efficient_surplus(mech);
  const Scalar b_star = equilibrium_bid(eta, n);

  Matrix<Scalar> mech_payoff(n, n);  // row w: mechanism payoffs with w first
  for (Index w = 0; w < n; ++w)
    mech_payoff.row(w) = run_pnc(mech, PncOptions{}, order_with_first(n, w)).payoffs.transpose();

  auto expected_payoff = [&](const Vector<Scalar>& bids, Index agent) {
    const auto ties = highest_bidders(bids);
    Scalar total = 0;
    for (Index w : ties) total += mech_payoff(w, agent) + auction_transfers(bids, w)(agent);
    return total / Scalar(ties.size());
  };

  BidAudit<Scalar> audit;
  const Vector<Scalar> symmetric = Vector<Scalar>::Constant(n, b_star);
  audit.equilibrium.resize(n);
  for (Index i = 0; i < n; ++i) audit.equilibrium(i) = expected_payoff(symmetric, i);
  for (Index i = 0; i < n; ++i) {
    for (Scalar b : bid_grid) {
      Vector<Scalar> bids = symmetric;
      bids(i) = b;
      const Scalar gain = expected_payoff(bids, i) - audit.equilibrium(i);
      ++audit.evaluated;
      if (!audit.max_gain || gain > *audit.max_gain) {
        audit.max_gain = gain;
        audit.agent_at_max = i;
        audit.bid_at_max = b;
      }
    }
  }
  return audit;
}

}  // namespace pnc

#endif  // PNC_AUCTION_HPP

#include "extrapush/netsim.hpp"

#include "extrapush/kernels.hpp"

#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <span>

namespace extrapush {

namespace {

constexpr double kConsistencySlack = 0.0;

std::vector<AgentState> make_agents(const DirectedGraph& g, const MixingMatrix& a) {
  const std::size_t n = g.size();
  require(a.size() == n, "mixing matrix and graph disagree on the number of agents");
  require(is_strongly_connected(g), "graph is not strongly connected");
  std::vector<AgentState> agents(n);
  for (std::size_t i = 0; i < n; ++i) {
    AgentState& ag = agents[i];
    ag.id = i;
    ag.out_neighbors = g.out_neighbors(i);
    for (std::size_t j : g.in_neighbors(i)) {
      const double aij = a.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      require(aij > kConsistencySlack, "A is not consistent with the graph: A(" + std::to_string(i) +
                                           ", " + std::to_string(j) + ") must be positive");
      ag.in_weights.emplace_back(j, aij);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double aij = a.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      bool listed = false;
      for (const auto& [k, w] : ag.in_weights) listed = listed || k == j;
      require(listed || aij == 0.0, "A is not consistent with the graph: A(" + std::to_string(i) +
                                        ", " + std::to_string(j) + ") has no edge");
    }
  }
  return agents;
}

/// Messages an agent emits at the start of a round: one per out-neighbour
/// other than itself. The receiver's weight is looked up in the receiver's
/// table, which the sender knows for column-stochastic push (A_ij is chosen
/// by sender j).
std::vector<RoundMessage> emit(const AgentState& sender, const MixingMatrix& a, std::size_t round) {
  std::vector<RoundMessage> out;
  for (std::size_t i : sender.out_neighbors) {
    if (i == sender.id) continue;
    const double aij = a.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(sender.id));
    RoundMessage m;
    m.round = round;
    m.sender = sender.id;
    m.receiver = i;
    m.w = aij * sender.w;
    m.z.resize(sender.z.size());
    for (Eigen::Index c = 0; c < sender.z.size(); ++c) m.z[c] = aij * sender.z[c];
    out.push_back(std::move(m));
  }
  return out;
}

struct Mixed {
  Vector z;
  double w = 0.0;
};

/// sum_j A_ij (z_(j), w_j) over ascending j, own term included.
Mixed receive(const AgentState& self, std::span<const RoundMessage* const> inbox, std::size_t round,
              bool need_w, LocalityReport& loc) {
  Mixed m;
  const auto p = self.z.size();
  m.z = Vector::Zero(p);
  std::size_t next = 0;
  for (const auto& [j, aij] : self.in_weights) {
    if (j == self.id) {
      ++loc.own_reads;
      for (Eigen::Index c = 0; c < p; ++c) m.z[c] += aij * self.z[c];
      if (need_w) m.w += aij * self.w;
      continue;
    }
    require(next < inbox.size() && inbox[next]->sender == j,
            "missing message from agent " + std::to_string(j) + " to " + std::to_string(self.id) +
                " in round " + std::to_string(round));
    const RoundMessage& msg = *inbox[next++];
    ++loc.message_reads;
    if (msg.receiver != self.id || msg.round != round) ++loc.violations;
    for (Eigen::Index c = 0; c < p; ++c) m.z[c] += msg.z[c];
    if (need_w) m.w += msg.w;
  }
  if (next != inbox.size()) ++loc.violations;
  return m;
}

void compute_x(AgentState& ag, bool push_sum, const StationaryDistribution* s) {
  const double denom = push_sum ? ag.w : s->d[static_cast<Eigen::Index>(ag.id)];
  ag.x.resize(ag.z.size());
  for (Eigen::Index c = 0; c < ag.z.size(); ++c) ag.x[c] = ag.z[c] / denom;
}

void compute_grad(AgentState& ag, const Objective& obj) {
  ag.grad.resize(ag.x.size());
  obj.gradient(ag.id, {ag.x.data(), static_cast<std::size_t>(ag.x.size())},
               {ag.grad.data(), static_cast<std::size_t>(ag.grad.size())});
}

void log_messages(std::ostream& out, const std::vector<std::vector<RoundMessage>>& sent) {
  char buf[128];
  for (const auto& per_sender : sent)
    for (const auto& m : per_sender) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%016llx\n", m.round, m.sender, m.receiver,
                    m.w, static_cast<unsigned long long>(fnv1a(m.z)));
      out << buf;
    }
}

/// Deliveries sorted by receiver, then ascending sender.
std::vector<std::vector<const RoundMessage*>> deliver(const std::vector<std::vector<RoundMessage>>& sent,
                                                      std::size_t n) {
  std::vector<std::vector<const RoundMessage*>> inbox(n);
  for (const auto& per_sender : sent)  // senders are visited in ascending id
    for (const auto& m : per_sender) inbox[m.receiver].push_back(&m);
  return inbox;
}

}  // namespace

std::uint64_t fnv1a(const Vector& v) {
  std::uint64_t h = 14695981039346656037ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k) {
    h ^= bytes[k];
    h *= 1099511628211ull;
  }
  return h;
}

std::size_t message_count(const DirectedGraph& g, std::size_t rounds) { return rounds * g.edge_count(); }

NetsimResult simulate_extrapush(const DirectedGraph& g, const MixingMatrix& a,
                                const StationaryDistribution* s, const Objective& obj,
                                const NetsimOptions& options, const Matrix& z0) {
  const bool push_sum = options.algorithm == Algorithm::extrapush;
  require(push_sum || options.algorithm == Algorithm::normalized_extrapush,
          "the agent engine runs extrapush and normalized-extrapush only");
  require(push_sum || s != nullptr, "normalized-extrapush needs the stationary distribution");
  require(options.alpha > 0.0, "step size alpha must be positive");
  auto agents = make_agents(g, a);
  const std::size_t n = agents.size();
  require(static_cast<std::size_t>(z0.rows()) == n && obj.agents() == n &&
              static_cast<std::size_t>(z0.cols()) == obj.dimension(),
          "starting point must be agents x dimension");

  std::ofstream log;
  std::string log_tmp;
  if (!options.message_log.empty()) {
    log_tmp = options.message_log.string() + ".tmp";
    log.open(log_tmp);
    require(static_cast<bool>(log), "cannot write " + log_tmp);
    log << "round,sender,receiver,w,z_hash\n";
  }

  NetsimResult res;
  const auto p = z0.cols();
  Matrix x_snapshot(static_cast<Eigen::Index>(n), p);
  auto snapshot = [&] {
    for (std::size_t i = 0; i < n; ++i) x_snapshot.row(static_cast<Eigen::Index>(i)) = agents[i].x.transpose();
    res.x_history.push_back(x_snapshot);
  };

  for (std::size_t i = 0; i < n; ++i) {
    agents[i].z = z0.row(static_cast<Eigen::Index>(i)).transpose();
    agents[i].w = 1.0;
    agents[i].y = Vector::Zero(p);
    compute_x(agents[i], push_sum, s);
    compute_grad(agents[i], obj);
  }
  snapshot();

  const double alpha = options.alpha;
  std::vector<LocalityReport> loc(n);
  for (std::size_t t = 1; t <= options.rounds; ++t) {
    std::vector<std::vector<RoundMessage>> sent(n);
#pragma omp parallel for schedule(static) if (n * static_cast<std::size_t>(p) >= 2048)
    for (std::size_t j = 0; j < n; ++j) sent[j] = emit(agents[j], a, t);
    for (const auto& v : sent) res.messages += v.size();
    if (log.is_open()) log_messages(log, sent);
    const auto inbox = deliver(sent, n);

    std::vector<std::exception_ptr> failures(n);
#pragma omp parallel for schedule(static) if (n * static_cast<std::size_t>(p) >= 2048)
    for (std::size_t i = 0; i < n; ++i) {
      try {
        AgentState& ag = agents[i];
        Mixed mixed = receive(ag, inbox[i], t, push_sum, loc[i]);
        Vector next(p);
        for (Eigen::Index c = 0; c < p; ++c) {
          ag.y[c] = kernels::correction_entry(ag.y[c], ag.z[c], mixed.z[c]);
          next[c] = kernels::extra_step_entry(ag.z[c], mixed.z[c], ag.y[c], ag.grad[c], alpha);
        }
        ag.z = std::move(next);
        if (push_sum) {
          require(mixed.w >= Tolerances::weight_floor,
                  "push-sum weight fell below the positivity floor; the mixing matrix is invalid");
          ag.w = mixed.w;
        }
        compute_x(ag, push_sum, s);
        compute_grad(ag, obj);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
    snapshot();
  }

  res.rounds = options.rounds;
  res.z.resize(static_cast<Eigen::Index>(n), p);
  res.w.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    res.z.row(static_cast<Eigen::Index>(i)) = agents[i].z.transpose();
    res.w[static_cast<Eigen::Index>(i)] = agents[i].w;
  }
  for (const auto& l : loc) {
    res.locality.own_reads += l.own_reads;
    res.locality.message_reads += l.message_reads;
    res.locality.violations += l.violations;
  }
  if (log.is_open()) {
    log.close();
    std::filesystem::rename(log_tmp, options.message_log);
  }
  return res;
}

std::vector<Vector> simulate_push_sum(const DirectedGraph& g, const MixingMatrix& a, const Vector& w0,
                                      std::size_t rounds) {
  auto agents = make_agents(g, a);
  const std::size_t n = agents.size();
  require(static_cast<std::size_t>(w0.size()) == n, "w0 must have one entry per agent");
  for (std::size_t i = 0; i < n; ++i) {
    agents[i].w = w0[static_cast<Eigen::Index>(i)];
    agents[i].z = Vector();
  }
  std::vector<Vector> history{w0};
  LocalityReport loc;
  for (std::size_t t = 1; t <= rounds; ++t) {
    std::vector<std::vector<RoundMessage>> sent(n);
    for (std::size_t j = 0; j < n; ++j) sent[j] = emit(agents[j], a, t);
    const auto inbox = deliver(sent, n);
    Vector w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = receive(agents[i], inbox[i], t, true, loc).w;
    for (std::size_t i = 0; i < n; ++i) agents[i].w = w[static_cast<Eigen::Index>(i)];
    history.push_back(std::move(w));
  }
  return history;
}

}  // namespace extrapush

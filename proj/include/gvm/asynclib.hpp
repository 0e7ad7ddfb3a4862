#pragma once

// Asynchronous channels as chains of promises over synchronous channels.
//
// An asynchronous end of protocol s is a promise: a single-shot channel from
// which the synchronous payload channel of type s is received. Every
// operation consumes the current promise and hands out a fresh one, filled
// by a forked helper thread, so the caller never blocks on its partner.

#include <optional>
#include <string>
#include <vector>

#include "gvm/parser.hpp"
#include "gvm/pretty.hpp"
#include "gvm/syntax.hpp"

namespace gvm {

// recv (chan s) end?
inline Session async_session(const Session& s) { return sess::recv(ty::chan(s), sess::end(Dir::Rcv)); }

namespace detail {

// Scope in which `names[i]` sits at de Bruijn index `indices[i]`.
inline std::vector<std::string> operand_scope(std::initializer_list<std::pair<std::size_t, const char*>> operands) {
  std::size_t size = 0;
  for (const auto& [k, name] : operands) size = std::max(size, k + 1);
  std::vector<std::string> scope(size);
  for (const auto& [k, name] : operands) scope[size - 1 - k] = name;
  return scope;
}

}  // namespace detail

// Closed expression of type
//   (pair (chan AT[s]) (chan AT[dual s]))
// Two helper threads fill the initial promises with the payload ends.
inline Expr build_anew(const Session& s, std::optional<SourceLoc> loc = std::nullopt) {
  const std::string S = to_string(s);
  const std::string D = to_string(dual(s));
  const std::string text =
      "(let sc (new " + S + ")"
      " (letpair s1 s2 sc"
      "  (let pa (new (send (chan " + S + ") end!))"
      "   (letpair pa1 pa2 pa"
      "    (let pb (new (send (chan " + D + ") end!))"
      "     (letpair pb1 pb2 pb"
      "      (let u1 (fork (let pa3 (send pa1 s1) (close pa3)))"
      "       (let u2 (fork (let pb3 (send pb1 s2) (close pb3)))"
      "        (pair pa2 pb2)))))))))";
  return parse_expr_in_scope(text, {}, loc);
}

// Asynchronous send on the promise `achan` (of type AT[s], s = send t s')
// of the value at `value`. Evaluates to the next promise, of type AT[s'],
// without waiting for the receiver.
inline Expr build_asend(std::size_t achan, std::size_t value, const Session& s,
                        std::optional<SourceLoc> loc = std::nullopt) {
  const std::string next = to_string(unfold(s).cont());
  const std::string text =
      "(let p (new (send (chan " + next + ") end!))"
      " (letpair snd rcv p"
      "  (let u (fork"
      "     (let r (recv achan)"
      "      (letpair achan2 schan r"
      "       (let schan2 (send schan value)"
      "        (let snd2 (send snd schan2)"
      "         (let z (wait achan2)"
      "          (close snd2)))))))"
      "   rcv)))";
  return parse_expr_in_scope(text, detail::operand_scope({{achan, "achan"}, {value, "value"}}), loc);
}

// Asynchronous receive on the promise `achan` (of type AT[s], s = recv t s').
// Blocks until the value arrives; evaluates to (pair value next-promise).
inline Expr build_arecv(std::size_t achan, const Session& s, std::optional<SourceLoc> loc = std::nullopt) {
  const std::string next = to_string(unfold(s).cont());
  const std::string text =
      "(let r (recv achan)"
      " (letpair achan2 schan r"
      "  (let r2 (recv schan)"
      "   (letpair schan2 value r2"
      "    (let p (new (send (chan " + next + ") end!))"
      "     (letpair snd rcv p"
      "      (let u (fork (let snd2 (send snd schan2) (let z (wait achan2) (close snd2))))"
      "       (pair value rcv))))))))";
  return parse_expr_in_scope(text, detail::operand_scope({{achan, "achan"}}), loc);
}

}  // namespace gvm

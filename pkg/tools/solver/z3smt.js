#!/usr/bin/env node
// Evaluate an SMT-LIB v2 script with the z3 WebAssembly build.
// Usage: node z3smt.js script.smt2   (or pipe the script on stdin)
// Prints solver output on stdout; exits 0 on success, 1 on launch failure.
const fs = require('fs');

(async () => {
  const { init } = require('z3-solver');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const input = fs.readFileSync(process.argv[2] || 0, 'utf8');
  const out = await Z3.eval_smtlib2_string(ctx, input);
  process.stdout.write(out + '\n');
  process.exit(0);
})().catch((e) => {
  console.error(String(e));
  process.exit(1);
});

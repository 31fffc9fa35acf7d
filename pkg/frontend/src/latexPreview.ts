/** Client-side LaTeX-to-MathML conversion of the engine's supported subset,
 * used only for the live query preview; the service parses authoritatively.
 * Browsers render the produced markup natively. */

export class PreviewError extends Error {
  constructor(
    message: string,
    readonly position: number,
  ) {
    super(message);
    this.name = "PreviewError";
  }
}

const GREEK: Record<string, string> = {
  alpha: "α", beta: "β", gamma: "γ", delta: "δ",
  epsilon: "ε", zeta: "ζ", eta: "η", theta: "θ",
  iota: "ι", kappa: "κ", lambda: "λ", mu: "μ",
  nu: "ν", xi: "ξ", omicron: "ο", pi: "π",
  rho: "ρ", sigma: "σ", tau: "τ", upsilon: "υ",
  phi: "φ", chi: "χ", psi: "ψ", omega: "ω",
  Gamma: "Γ", Delta: "Δ", Theta: "Θ", Lambda: "Λ",
  Xi: "Ξ", Pi: "Π", Sigma: "Σ", Upsilon: "Υ",
  Phi: "Φ", Psi: "Ψ", Omega: "Ω",
};
const SYMBOLS: Record<string, string> = { ...GREEK, infty: "∞" };
const OPERATORS: Record<string, string> = {
  cdot: "⋅", times: "×", leq: "≤", geq: "≥", neq: "≠",
};
const FUNCTIONS = new Set(["sin", "cos", "tan", "log", "ln", "exp", "lim"]);
const BIG_OPERATORS: Record<string, string> = {
  sum: "∑", int: "∫", prod: "∏",
};
const PLAIN_OPERATORS = new Set(["+", "-", "*", "/", "=", "<", ">", "|"]);
const CLOSERS: Record<string, string> = { "(": ")", "[": "]" };

type Kind =
  | "symbol" | "number" | "group" | "fraction" | "sqrt"
  | "superscript" | "subscript" | "operator" | "function" | "bigop";

interface Node {
  kind: Kind;
  children: Node[];
  literal?: string;
}

const MULTIPLICAND = new Set<Kind>([
  "symbol", "number", "group", "fraction", "sqrt", "superscript", "subscript",
]);

class Parser {
  private pos = 0;

  constructor(private readonly src: string) {}

  parse(): Node {
    if (this.peek() === null) throw new PreviewError("empty math fragment", 0);
    const seq = this.sequence(new Set());
    const ch = this.peek();
    if (ch !== null) throw new PreviewError(`unexpected '${ch}'`, this.pos);
    return seq.children.length === 1 ? seq.children[0]! : seq;
  }

  private peek(): string | null {
    for (;;) {
      while (this.pos < this.src.length && /\s/.test(this.src[this.pos]!)) this.pos += 1;
      // \left / \right only mark stretchiness; a null '.' delimiter vanishes
      const rest = this.src.slice(this.pos);
      const marker = /^\\(left|right)(?![A-Za-z])/.exec(rest);
      if (!marker) break;
      this.pos += marker[0].length;
      while (this.pos < this.src.length && /\s/.test(this.src[this.pos]!)) this.pos += 1;
      if (this.src[this.pos] === ".") this.pos += 1;
    }
    return this.pos < this.src.length ? this.src[this.pos]! : null;
  }

  private sequence(stops: Set<string>): Node {
    const atoms: Node[] = [];
    for (;;) {
      const ch = this.peek();
      if (ch === null || stops.has(ch)) return { kind: "group", children: atoms };
      atoms.push(this.atom());
    }
  }

  private atom(): Node {
    let node = this.base();
    let sub: Node | null = null;
    let sup: Node | null = null;
    for (;;) {
      const ch = this.peek();
      if (ch === "^") {
        if (sup) throw new PreviewError("double superscript", this.pos);
        this.pos += 1;
        sup = this.argument();
      } else if (ch === "_") {
        if (sub) throw new PreviewError("double subscript", this.pos);
        this.pos += 1;
        sub = this.argument();
      } else {
        break;
      }
    }
    if (sub) node = { kind: "subscript", children: [node, sub] };
    if (sup) node = { kind: "superscript", children: [node, sup] };
    return node;
  }

  private argument(): Node {
    const ch = this.peek();
    if (ch === null) throw new PreviewError("missing argument", this.pos);
    if (ch === "{") {
      const open = this.pos;
      this.pos += 1;
      const seq = this.sequence(new Set(["}"]));
      if (this.peek() !== "}") throw new PreviewError("unclosed '{'", open);
      this.pos += 1;
      return seq.children.length === 1 ? seq.children[0]! : seq;
    }
    return this.base();
  }

  private base(): Node {
    const ch = this.peek();
    if (ch === null) throw new PreviewError("missing token", this.pos);
    const at = this.pos;
    if (ch === "{") {
      this.pos += 1;
      const seq = this.sequence(new Set(["}"]));
      if (this.peek() !== "}") throw new PreviewError("unclosed '{'", at);
      this.pos += 1;
      return seq;
    }
    if (ch in CLOSERS) {
      const closer = CLOSERS[ch]!;
      this.pos += 1;
      const seq = this.sequence(new Set([closer]));
      if (this.peek() !== closer) throw new PreviewError("unclosed fence", at);
      this.pos += 1;
      return {
        kind: "group",
        children: [
          { kind: "operator", children: [], literal: ch },
          ...seq.children,
          { kind: "operator", children: [], literal: closer },
        ],
      };
    }
    if (ch === ")" || ch === "]" || ch === "}") {
      throw new PreviewError(`unmatched '${ch}'`, at);
    }
    if (ch === "\\") return this.command();
    if (/[A-Za-z]/.test(ch)) {
      this.pos += 1;
      return { kind: "symbol", children: [], literal: ch };
    }
    if (/[0-9]/.test(ch)) {
      const match = /^[0-9]+(\.[0-9]+)?/.exec(this.src.slice(this.pos))!;
      this.pos += match[0].length;
      return { kind: "number", children: [], literal: match[0] };
    }
    if (PLAIN_OPERATORS.has(ch)) {
      this.pos += 1;
      return { kind: "operator", children: [], literal: ch === "-" ? "−" : ch };
    }
    throw new PreviewError(`unsupported '${ch}'`, at);
  }

  private command(): Node {
    const start = this.pos;
    const match = /^\\([A-Za-z]+|.)/.exec(this.src.slice(this.pos));
    if (!match) throw new PreviewError("lone backslash", start);
    const name = match[1]!;
    this.pos += match[0].length;
    if (name === "frac") {
      const numerator = this.argument();
      const denominator = this.argument();
      return { kind: "fraction", children: [numerator, denominator] };
    }
    if (name === "sqrt") return { kind: "sqrt", children: [this.argument()] };
    if (name in SYMBOLS) return { kind: "symbol", children: [], literal: SYMBOLS[name] };
    if (name in OPERATORS) return { kind: "operator", children: [], literal: OPERATORS[name] };
    if (FUNCTIONS.has(name)) return { kind: "function", children: [], literal: name };
    if (name in BIG_OPERATORS) {
      return { kind: "bigop", children: [], literal: BIG_OPERATORS[name] };
    }
    throw new PreviewError(`unsupported command \\${name}`, start);
  }
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function emit(node: Node): string {
  switch (node.kind) {
    case "symbol":
    case "function":
      return `<mi>${esc(node.literal ?? "")}</mi>`;
    case "number":
      return `<mn>${esc(node.literal ?? "")}</mn>`;
    case "operator":
    case "bigop":
      return `<mo>${esc(node.literal ?? "")}</mo>`;
    case "fraction":
      return `<mfrac>${emit(node.children[0]!)}${emit(node.children[1]!)}</mfrac>`;
    case "sqrt":
      return `<msqrt>${emit(node.children[0]!)}</msqrt>`;
    case "superscript":
      return `<msup>${emit(node.children[0]!)}${emit(node.children[1]!)}</msup>`;
    case "subscript":
      return `<msub>${emit(node.children[0]!)}${emit(node.children[1]!)}</msub>`;
    case "group": {
      const parts: string[] = [];
      let previous: Node | null = null;
      for (const child of node.children) {
        if (previous && MULTIPLICAND.has(previous.kind) && MULTIPLICAND.has(child.kind)) {
          parts.push("<mo>⁢</mo>"); // invisible times for juxtaposition
        }
        parts.push(emit(child));
        previous = child;
      }
      return parts.length === 1 ? parts[0]! : `<mrow>${parts.join("")}</mrow>`;
    }
  }
}

/** Convert one math fragment (no dollar signs) to a `<math>` element string.
 * Throws PreviewError with a character position on unsupported input. */
export function latexToMathML(fragment: string): string {
  const body = emit(new Parser(fragment).parse());
  return `<math xmlns="http://www.w3.org/1998/Math/MathML">${body}</math>`;
}

export interface PreviewSegment {
  kind: "text" | "math" | "error";
  content: string;
  position?: number;
}

/** Split a query on $...$ and convert each math segment for display. */
export function previewSegments(query: string): PreviewSegment[] {
  const segments: PreviewSegment[] = [];
  let pos = 0;
  for (;;) {
    const start = query.indexOf("$", pos);
    if (start < 0) break;
    const end = query.indexOf("$", start + 1);
    if (end < 0) {
      segments.push({ kind: "text", content: query.slice(pos, start) });
      segments.push({ kind: "error", content: "unterminated '$'", position: start });
      return segments;
    }
    if (start > pos) segments.push({ kind: "text", content: query.slice(pos, start) });
    const fragment = query.slice(start + 1, end);
    try {
      segments.push({ kind: "math", content: latexToMathML(fragment) });
    } catch (err) {
      if (err instanceof PreviewError) {
        segments.push({
          kind: "error",
          content: err.message,
          position: start + 1 + err.position,
        });
      } else {
        throw err;
      }
    }
    pos = end + 1;
  }
  if (pos < query.length) segments.push({ kind: "text", content: query.slice(pos) });
  return segments;
}

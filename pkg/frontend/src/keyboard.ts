/** Keyboard bindings: the full flow works without a pointer.
 *
 * Space or T toggles which variant is shown, 1/A selects variant A,
 * 2/B selects variant B, Enter submits (or retries after an error).
 */

export type KeyCommand =
  | { kind: "toggle" }
  | { kind: "select"; label: "A" | "B" }
  | { kind: "submit" };

export function commandForKey(key: string): KeyCommand | null {
  switch (key.length === 1 ? key.toLowerCase() : key) {
    case " ":
    case "t":
      return { kind: "toggle" };
    case "1":
    case "a":
      return { kind: "select", label: "A" };
    case "2":
    case "b":
      return { kind: "select", label: "B" };
    case "Enter":
      return { kind: "submit" };
    default:
      return null;
  }
}

/**
 * Prompt templates. The article is always "a", even before vowel-initial
 * class names, to stay byte-compatible with the published prompt lists.
 */

export function renderPrompts(classNames: string[], domainName?: string): string[] {
  if (classNames.length === 0) {
    throw new Error("class list is empty");
  }
  if (new Set(classNames).size !== classNames.length) {
    throw new Error("class list contains duplicates");
  }
  if (domainName === undefined) {
    return classNames.map((name) => `a photo of a ${name}`);
  }
  return classNames.map((name) => `a ${domainName} photo of a ${name}`);
}
